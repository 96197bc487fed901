#include "obda/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace obda {

bool VariantConfig::attends(Level level) const
{
    return std::find(attention_levels.begin(), attention_levels.end(), level) != attention_levels.end();
}

void VariantConfig::validate() const
{
    if (fusion_mode == FusionMode::early_fusion) {
        require(attention_levels.empty(), ErrorKind::config, "early fusion forbids cross-attention");
        require(!compressed(), ErrorKind::config, "early fusion forbids latent compression");
        require(!drop_d3, ErrorKind::config, "early fusion forbids dropping D3");
    }
    require(attention_channel_reduction >= 1, ErrorKind::config, "attention channel reduction must be >= 1");
    require(compression_ratio == 0 || compression_ratio >= 2, ErrorKind::config,
            "compression ratio must be none (0) or >= 2");
    for (std::size_t i = 0; i < attention_levels.size(); ++i) {
        for (std::size_t j = i + 1; j < attention_levels.size(); ++j) {
            require(attention_levels[i] != attention_levels[j], ErrorKind::config, "duplicate attention level");
        }
    }
    require(!(drop_d3 && attends(Level::D3)), ErrorKind::config, "cannot attend on a dropped D3 level");
}

VariantConfig VariantConfig::named(const std::string& name)
{
    VariantConfig v;
    v.attention_levels.clear();
    if (name == "EF") {
        v.fusion_mode = FusionMode::early_fusion;
        return v;
    }
    std::string rest = name;
    auto consume = [&rest](const std::string& token) {
        if (rest.rfind(token, 0) == 0) {
            rest.erase(0, token.size());
            return true;
        }
        return false;
    };
    require(consume("S"), ErrorKind::config, "unknown variant '" + name + "'");
    if (consume("+A+D3")) {
        v.attention_levels = {Level::D3, Level::D4, Level::D5};
    } else if (rest.rfind("+Aug", 0) != 0 && consume("+A")) {
        v.attention_levels = {Level::D4, Level::D5};
    }
    if (consume("+Aug")) {
        v.shift_augmentation = true;
    }
    if (consume("+Comp64")) {
        v.compression_ratio = 64;
    } else if (consume("+Comp8")) {
        v.compression_ratio = 8;
    }
    if (consume("-D3")) {
        v.drop_d3 = true;
    }
    require(rest.empty(), ErrorKind::config, "unknown variant '" + name + "'");
    v.validate();
    return v;
}

std::vector<std::string> VariantConfig::ablation_row_names()
{
    return {"EF", "S", "S+A", "S+A+D3", "S+Aug", "S+A+Aug", "S+A+Aug+Comp8", "S+A+Aug+Comp64", "S+A+Aug+Comp64-D3"};
}

std::string to_string(FusionMode mode) { return mode == FusionMode::siamese ? "siamese" : "early_fusion"; }

FusionMode fusion_mode_from_string(const std::string& name)
{
    if (name == "siamese") return FusionMode::siamese;
    if (name == "early_fusion") return FusionMode::early_fusion;
    fail(ErrorKind::config, "unknown fusion mode '" + name + "'");
}

template <typename T>
Tensor<T> fuse_early(const Tensor<T>& pre, const Tensor<T>& post)
{
    require(pre.rank() == 3 && pre.dim(0) == 3, ErrorKind::input, "fuse_early expects (3,H,W) images");
    require(pre.shape() == post.shape(), ErrorKind::input,
            "pre/post dims differ: " + shape_str(pre.shape()) + " vs " + shape_str(post.shape()));
    return concat_channels<T>({pre, post});
}

template <typename T>
CrossAttention<T>::CrossAttention(int channels, int reduction, ParamStore<T>& store, Rng& rng,
                                  const std::string& prefix, Init up_init)
    : channels_(channels), reduced_(0)
{
    require(reduction >= 1 && channels % reduction == 0, ErrorKind::config,
            "attention: " + std::to_string(channels) + " channels not divisible by reduction " +
                std::to_string(reduction));
    reduced_ = channels / reduction;
    query = Conv<T>::create(store, prefix + ".query", channels, reduced_, 1, 1, rng);
    key = Conv<T>::create(store, prefix + ".key", channels, reduced_, 1, 1, rng);
    value = Conv<T>::create(store, prefix + ".value", channels, reduced_, 1, 1, rng);
    up = Conv<T>::create(store, prefix + ".up", reduced_, channels, 1, 1, rng, up_init);
}

template <typename T>
FeatureMap<T> CrossAttention<T>::refine(const FeatureMap<T>& pre, const FeatureMap<T>& post, Trace* trace) const
{
    require(pre.level == post.level && pre.data.shape() == post.data.shape(), ErrorKind::config,
            "attention: pre/post maps differ in level or shape");
    require(pre.channels() == channels_, ErrorKind::config, "attention: unexpected channel count");
    const int h = pre.height(), w = pre.width(), n = h * w;
    const Shape tokens{reduced_, n};
    Tensor<T> q = transpose(reshape(query(pre.data), tokens));  // (N, d)
    Tensor<T> k = reshape(key(post.data), tokens);              // (d, N)
    Tensor<T> v = transpose(reshape(value(post.data), tokens)); // (N, d)
    Tensor<T> weights = softmax_rows(scale(matmul(q, k), T(1) / std::sqrt(static_cast<T>(reduced_))));
    Tensor<T> attended = reshape(transpose(matmul(weights, v)), {reduced_, h, w});
    if (trace) {
        trace->weights = weights;
        trace->attended = attended;
    }
    return {post.level, add(post.data, up(attended))};
}

template <typename T>
SiameseFusion<T>::SiameseFusion(const VariantConfig& variant, const EncoderConfig& encoder, ParamStore<T>& store,
                                Rng& rng, const std::string& prefix)
    : variant_(variant)
{
    variant_.validate();
    require(variant_.fusion_mode == FusionMode::siamese, ErrorKind::config, "SiameseFusion needs siamese mode");
    for (Level level : variant_.attention_levels) {
        attention_[level_index(level)] = std::make_unique<CrossAttention<T>>(
            encoder.channels_at(level), variant_.attention_channel_reduction, store, rng,
            prefix + ".attention_" + to_string(level));
    }
}

template <typename T>
Pyramid<T> SiameseFusion<T>::fuse(const Pyramid<T>& pre, const Pyramid<T>& post) const
{
    require(pre.size() == post.size(), ErrorKind::config, "fuse_siamese: pyramids have different level counts");
    Pyramid<T> fused;
    for (std::size_t i = 0; i < pre.size(); ++i) {
        const auto& p = pre.levels[i];
        const auto& q = post.levels[i];
        require(p.level == q.level, ErrorKind::config, "fuse_siamese: level mismatch");
        require(!(variant_.drop_d3 && p.level == Level::D3), ErrorKind::config,
                "fuse_siamese: D3 present although drop_d3 is set");
        const auto* attn = attention(p.level);
        const FeatureMap<T> refined = attn ? attn->refine(p, q) : q;
        fused.levels.push_back({p.level, concat_channels<T>({p.data, refined.data, sub(p.data, refined.data)})});
    }
    return fused;
}

template Tensor<float> fuse_early(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> fuse_early(const Tensor<double>&, const Tensor<double>&);
template class CrossAttention<float>;
template class CrossAttention<double>;
template class SiameseFusion<float>;
template class SiameseFusion<double>;

}  // namespace obda
