#include "obda/encoder.hpp"

namespace obda {

namespace {
constexpr double kActGain = 1.6;       // keeps activation variance roughly flat through SiLU
constexpr double kResidualGain = 0.5;  // residual branches start small
}  // namespace

void EncoderConfig::validate() const
{
    require(in_channels == 3 || in_channels == 6, ErrorKind::config, "encoder in_channels must be 3 or 6");
    require(channels[0] > 0 && channels[0] < channels[1] && channels[1] < channels[2], ErrorKind::config,
            "encoder channels must be strictly increasing");
    require(channels[0] % 4 == 0, ErrorKind::config, "D3 channel count must be divisible by 4");
    require(depth >= 0, ErrorKind::config, "encoder depth must be non-negative");
}

void check_image_dims(const Shape& shape, int expected_channels)
{
    require(shape.size() == 3, ErrorKind::input, "image must be (C,H,W), got " + shape_str(shape));
    require(shape[0] == expected_channels, ErrorKind::input,
            "image has " + std::to_string(shape[0]) + " channels, expected " + std::to_string(expected_channels));
    require(shape[1] % 32 == 0 && shape[2] % 32 == 0, ErrorKind::input,
            "image dims must be divisible by 32, got " + shape_str(shape));
}

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& cfg, ParamStore<T>& store, Rng& rng, const std::string& prefix)
    : cfg_(cfg)
{
    cfg_.validate();
    const int c_stem = cfg.channels[0] / 4;
    const int c_pre = cfg.channels[0] / 2;
    stem_ = Conv<T>::create(store, prefix + ".stem", cfg.in_channels, c_stem, 3, 2, rng, Init::fan_in_uniform, kActGain);
    pre_tap_ = make_stage(store, rng, prefix + ".stage1", c_stem, c_pre);
    int c_in = c_pre;
    for (Level level : kAllLevels) {
        const int c_out = cfg.channels_at(level);
        taps_[level_index(level)] = make_stage(store, rng, prefix + ".stage_" + to_string(level), c_in, c_out);
        c_in = c_out;
    }
}

template <typename T>
typename Encoder<T>::Stage Encoder<T>::make_stage(ParamStore<T>& store, Rng& rng, const std::string& name, int c_in,
                                                  int c_out)
{
    Stage stage;
    stage.down = Conv<T>::create(store, name + ".down", c_in, c_out, 3, 2, rng, Init::fan_in_uniform, kActGain);
    for (int b = 0; b < cfg_.depth; ++b) {
        stage.blocks.push_back(Conv<T>::create(store, name + ".block" + std::to_string(b), c_out, c_out, 3, 1, rng,
                                               Init::fan_in_uniform, kResidualGain));
    }
    return stage;
}

template <typename T>
Tensor<T> Encoder<T>::run(const Stage& stage, Tensor<T> x) const
{
    x = silu(stage.down(x));
    for (const auto& block : stage.blocks) {
        x = add(x, silu(block(x)));
    }
    return x;
}

template <typename T>
Pyramid<T> Encoder<T>::encode(const Tensor<T>& image, bool include_d3) const
{
    check_image_dims(image.shape(), cfg_.in_channels);
    Tensor<T> x = run(pre_tap_, silu(stem_(image)));
    Pyramid<T> out;
    for (Level level : kAllLevels) {
        x = run(taps_[level_index(level)], x);
        if (level != Level::D3 || include_d3) {
            out.levels.push_back({level, x});
        }
    }
    return out;
}

template <typename T>
std::pair<Pyramid<T>, Pyramid<T>> encode_siamese(const Encoder<T>& encoder, const Tensor<T>& pre,
                                                 const Tensor<T>& post, bool include_d3)
{
    require(encoder.config().in_channels == 3, ErrorKind::config, "siamese encoding needs a 3-channel encoder");
    require(pre.shape() == post.shape(), ErrorKind::input,
            "pre/post dims differ: " + shape_str(pre.shape()) + " vs " + shape_str(post.shape()));
    return {encoder.encode(pre, include_d3), encoder.encode(post, include_d3)};
}

template class Encoder<float>;
template class Encoder<double>;
template std::pair<Pyramid<float>, Pyramid<float>> encode_siamese(const Encoder<float>&, const Tensor<float>&,
                                                                  const Tensor<float>&, bool);
template std::pair<Pyramid<double>, Pyramid<double>> encode_siamese(const Encoder<double>&, const Tensor<double>&,
                                                                    const Tensor<double>&, bool);

}  // namespace obda
