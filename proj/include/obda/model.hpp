#pragma once

#include <memory>
#include <optional>

#include "obda/config.hpp"
#include "obda/detector.hpp"
#include "obda/fusion.hpp"
#include "obda/latent_codec.hpp"

namespace obda {

// Whether the uplinked pre-disaster latent passes through int8 quantization.
enum class LatentPrecision { exact, int8 };

struct ModelSpec {
    EncoderConfig encoder;
    VariantConfig variant;
    int head_width = 64;

    static ModelSpec from(const ExperimentConfig& c) { return {c.encoder, c.variant, c.head_width}; }
};

// Full detector: shared encoder, fusion (early or siamese with optional
// cross-attention), optional latent codec, FPN and head. The siamese path is
// split into a ground half (pre image -> latent pyramid) and an on-board half
// (latent + post image -> head output); forward() composes the two.
template <typename T>
class DamageModel {
public:
    DamageModel(const ModelSpec& spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }

    // pre/post: network inputs (3,H,W), H and W divisible by 32.
    HeadOutput<T> forward(const Tensor<T>& pre, const Tensor<T>& post, LatentPrecision precision) const;

    // Ground half: backbone features of the pre image, compressed when the
    // variant compresses. Not available for early fusion.
    Pyramid<T> encode_ground(const Tensor<T>& pre) const;
    // On-board half: expands the latent (when compressed), encodes the post
    // image with the same backbone and runs fusion, FPN and head.
    HeadOutput<T> forward_onboard(const Pyramid<T>& latent, const Tensor<T>& post) const;

    // Precision used during training and evaluation: int8 (straight-through)
    // when the variant compresses, exact otherwise.
    LatentPrecision training_precision() const
    {
        return spec_.variant.compressed() ? LatentPrecision::int8 : LatentPrecision::exact;
    }

    const Encoder<T>& encoder() const { return *encoder_; }
    const SiameseFusion<T>* fusion() const { return fusion_.get(); }
    const LatentCodec<T>* codec() const { return codec_.get(); }

private:
    HeadOutput<T> finish(const Pyramid<T>& fused) const;

    ModelSpec spec_;
    ParamStore<T> store_;
    std::unique_ptr<Encoder<T>> encoder_;
    std::unique_ptr<SiameseFusion<T>> fusion_;
    std::unique_ptr<LatentCodec<T>> codec_;
    std::unique_ptr<Fpn<T>> fpn_;
    std::unique_ptr<DetectionHead<T>> head_;
};

// Channel counts the FPN receives for a spec (0 = level absent).
std::array<int, 3> fused_channels(const ModelSpec& spec);

template <typename T>
Pyramid<T> quantize_pyramid_ste(const Pyramid<T>& p);

extern template class DamageModel<float>;
extern template class DamageModel<double>;

}  // namespace obda
