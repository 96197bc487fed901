#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "obda/encoder.hpp"

namespace obda {

enum class FusionMode { early_fusion, siamese };

// The ablation switchboard. compression_ratio == 0 means no latent compression.
struct VariantConfig {
    FusionMode fusion_mode = FusionMode::siamese;
    std::vector<Level> attention_levels{Level::D4, Level::D5};
    int attention_channel_reduction = 4;
    int compression_ratio = 0;
    bool drop_d3 = false;
    bool shift_augmentation = false;

    bool attends(Level level) const;
    bool compressed() const { return compression_ratio != 0; }
    void validate() const;
    bool operator==(const VariantConfig&) const = default;

    // Table-style row names: "EF", "S", "S+A", "S+A+D3", "S+Aug", "S+A+Aug",
    // "S+A+Aug+Comp8", "S+A+Aug+Comp64", "S+A+Aug+Comp64-D3".
    static VariantConfig named(const std::string& name);
    static std::vector<std::string> ablation_row_names();
};

std::string to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& name);

// Channel concatenation [pre; post] for the 6-channel early-fusion encoder.
template <typename T>
Tensor<T> fuse_early(const Tensor<T>& pre, const Tensor<T>& post);

// Single-head asymmetric cross-attention: queries from pre features, keys and
// values from post features, residual refinement of the post map.
template <typename T>
class CrossAttention {
public:
    struct Trace {
        Tensor<T> weights;   // (N, N) row-stochastic attention matrix
        Tensor<T> attended;  // (C/reduction, H, W)
    };

    CrossAttention(int channels, int reduction, ParamStore<T>& store, Rng& rng, const std::string& prefix,
                   Init up_init = Init::zeros);

    FeatureMap<T> refine(const FeatureMap<T>& pre, const FeatureMap<T>& post, Trace* trace = nullptr) const;

    int channels() const { return channels_; }
    int reduced_channels() const { return reduced_; }

    Conv<T> query;
    Conv<T> key;
    Conv<T> value;
    Conv<T> up;

private:
    int channels_;
    int reduced_;
};

// Concat+difference fusion of matched pyramids, optionally refining the post
// branch through cross-attention first. Output per level: [pre | post' | pre - post'].
template <typename T>
class SiameseFusion {
public:
    SiameseFusion(const VariantConfig& variant, const EncoderConfig& encoder, ParamStore<T>& store, Rng& rng,
                  const std::string& prefix = "fusion");

    Pyramid<T> fuse(const Pyramid<T>& pre, const Pyramid<T>& post) const;

    const CrossAttention<T>* attention(Level level) const { return attention_[level_index(level)].get(); }

private:
    VariantConfig variant_;
    std::array<std::unique_ptr<CrossAttention<T>>, 3> attention_;
};

extern template class CrossAttention<float>;
extern template class CrossAttention<double>;
extern template class SiameseFusion<float>;
extern template class SiameseFusion<double>;

}  // namespace obda
