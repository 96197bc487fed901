#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "obda/layers.hpp"
#include "obda/pyramid.hpp"

namespace obda {

struct EncoderConfig {
    int in_channels = 3;
    std::array<int, 3> channels{16, 32, 64};  // D3, D4, D5
    int depth = 1;                            // residual blocks per stage

    static EncoderConfig toy(int in_channels = 3) { return {in_channels, {16, 32, 64}, 1}; }
    static EncoderConfig reference(int in_channels = 3) { return {in_channels, {128, 256, 512}, 1}; }

    int channels_at(Level level) const { return channels[level_index(level)]; }
    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

// Plain residual stage stack: stride-2 stem, one stride-2 stage, then the
// three tapped stages at cumulative strides 8, 16 and 32.
template <typename T>
class Encoder {
public:
    Encoder(const EncoderConfig& cfg, ParamStore<T>& store, Rng& rng, const std::string& prefix = "encoder");

    // image: (in_channels, H, W) with H and W divisible by 32. When include_d3
    // is false the D3 map is still computed internally (D4 builds on it) but
    // not emitted.
    Pyramid<T> encode(const Tensor<T>& image, bool include_d3 = true) const;

    const EncoderConfig& config() const { return cfg_; }

private:
    struct Stage {
        Conv<T> down;
        std::vector<Conv<T>> blocks;
    };

    Stage make_stage(ParamStore<T>& store, Rng& rng, const std::string& name, int c_in, int c_out);
    Tensor<T> run(const Stage& stage, Tensor<T> x) const;

    EncoderConfig cfg_;
    Conv<T> stem_;
    Stage pre_tap_;
    std::array<Stage, 3> taps_;
};

void check_image_dims(const Shape& shape, int expected_channels);

// Both branches run through the same Encoder instance (one weight store).
template <typename T>
std::pair<Pyramid<T>, Pyramid<T>> encode_siamese(const Encoder<T>& encoder, const Tensor<T>& pre,
                                                 const Tensor<T>& post, bool include_d3 = true);

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace obda
