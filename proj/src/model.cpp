#include "obda/model.hpp"

namespace obda {

std::array<int, 3> fused_channels(const ModelSpec& spec)
{
    const int factor = spec.variant.fusion_mode == FusionMode::siamese ? 3 : 1;
    std::array<int, 3> out{};
    for (Level level : kAllLevels) {
        if (spec.variant.drop_d3 && level == Level::D3) {
            continue;
        }
        out[level_index(level)] = factor * spec.encoder.channels_at(level);
    }
    return out;
}

template <typename T>
Pyramid<T> quantize_pyramid_ste(const Pyramid<T>& p)
{
    Pyramid<T> out;
    for (const auto& m : p.levels) {
        out.levels.push_back({m.level, quantize_ste(m.data)});
    }
    return out;
}

template <typename T>
DamageModel<T>::DamageModel(const ModelSpec& spec, std::uint64_t seed) : spec_(spec)
{
    spec_.variant.validate();
    spec_.encoder.validate();
    const bool siamese = spec_.variant.fusion_mode == FusionMode::siamese;
    require(spec_.encoder.in_channels == (siamese ? 3 : 6), ErrorKind::config,
            "encoder input channels do not match the fusion mode");
    Rng rng(seed);
    encoder_ = std::make_unique<Encoder<T>>(spec_.encoder, store_, rng);
    if (siamese) {
        fusion_ = std::make_unique<SiameseFusion<T>>(spec_.variant, spec_.encoder, store_, rng);
        if (spec_.variant.compressed()) {
            codec_ = std::make_unique<LatentCodec<T>>(spec_.encoder, spec_.variant.compression_ratio,
                                                      spec_.variant.drop_d3, store_, rng);
        }
    }
    fpn_ = std::make_unique<Fpn<T>>(fused_channels(spec_), spec_.head_width, store_, rng);
    head_ = std::make_unique<DetectionHead<T>>(spec_.head_width, store_, rng);
}

template <typename T>
HeadOutput<T> DamageModel<T>::finish(const Pyramid<T>& fused) const
{
    return head_->predict(fpn_->aggregate(fused));
}

template <typename T>
Pyramid<T> DamageModel<T>::encode_ground(const Tensor<T>& pre) const
{
    require(fusion_ != nullptr, ErrorKind::config, "early fusion has no separable ground encoder");
    Pyramid<T> features = encoder_->encode(pre, !spec_.variant.drop_d3);
    return codec_ ? codec_->compress(features) : features;
}

template <typename T>
HeadOutput<T> DamageModel<T>::forward_onboard(const Pyramid<T>& latent, const Tensor<T>& post) const
{
    require(fusion_ != nullptr, ErrorKind::config, "early fusion has no separable on-board half");
    const Pyramid<T> pre_features = codec_ ? codec_->expand(latent) : latent;
    for (const auto& m : pre_features.levels) {
        require(m.channels() == spec_.encoder.channels_at(m.level), ErrorKind::integrity,
                "latent level " + to_string(m.level) + " does not match the model");
    }
    const Pyramid<T> post_features = encoder_->encode(post, !spec_.variant.drop_d3);
    require(pre_features.size() == post_features.size(), ErrorKind::integrity,
            "latent pyramid levels do not match the model");
    for (std::size_t i = 0; i < pre_features.size(); ++i) {
        require(pre_features.levels[i].data.shape() == post_features.levels[i].data.shape(), ErrorKind::input,
                "latent and post image cover different extents");
    }
    return finish(fusion_->fuse(pre_features, post_features));
}

template <typename T>
HeadOutput<T> DamageModel<T>::forward(const Tensor<T>& pre, const Tensor<T>& post, LatentPrecision precision) const
{
    require(pre.shape() == post.shape(), ErrorKind::input, "pre and post inputs differ in shape");
    if (!fusion_) {
        return finish(encoder_->encode(fuse_early(pre, post), !spec_.variant.drop_d3));
    }
    Pyramid<T> latent = encode_ground(pre);
    if (precision == LatentPrecision::int8) {
        latent = quantize_pyramid_ste(latent);
    }
    return forward_onboard(latent, post);
}

template Pyramid<float> quantize_pyramid_ste(const Pyramid<float>&);
template Pyramid<double> quantize_pyramid_ste(const Pyramid<double>&);
template class DamageModel<float>;
template class DamageModel<double>;

}  // namespace obda
