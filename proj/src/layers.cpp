#include "obda/layers.hpp"

#include <cmath>

namespace obda {

template <typename T>
Tensor<T> ParamStore<T>::add(const std::string& name, Shape shape, Init init, Rng& rng, int fan_in, double gain)
{
    for (const auto& p : params_) {
        require(p.name != name, ErrorKind::config, "duplicate parameter name " + name);
    }
    Tensor<T> t(shape, T(0), true);
    auto v = t.values_mut();
    switch (init) {
    case Init::fan_in_uniform: {
        const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& x : v) {
            x = static_cast<T>(dist(rng));
        }
        break;
    }
    case Init::zeros:
        break;
    case Init::identity: {
        require(shape.size() == 4 && shape[0] == shape[1] && shape[2] == 1 && shape[3] == 1, ErrorKind::config,
                "identity init requires a square 1x1 kernel");
        for (int i = 0; i < shape[0]; ++i) {
            v[static_cast<std::size_t>(i) * shape[0] + i] = T(1);
        }
        break;
    }
    }
    params_.push_back({name, t});
    return t;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& p : params_) {
        n += p.tensor.numel();
    }
    return n;
}

template <typename T>
const Tensor<T>& ParamStore<T>::find(const std::string& name) const
{
    for (const auto& p : params_) {
        if (p.name == name) {
            return p.tensor;
        }
    }
    fail(ErrorKind::config, "unknown parameter " + name);
}

template <typename T>
void ParamStore<T>::zero_grad()
{
    for (auto& p : params_) {
        p.tensor.zero_grad();
    }
}

template <typename T>
std::vector<float> ParamStore<T>::flatten() const
{
    std::vector<float> flat;
    flat.reserve(scalar_count());
    for (const auto& p : params_) {
        for (T v : p.tensor.values()) {
            flat.push_back(static_cast<float>(v));
        }
    }
    return flat;
}

template <typename T>
void ParamStore<T>::load_flat(const std::vector<float>& flat)
{
    require(flat.size() == scalar_count(), ErrorKind::integrity,
            "parameter blob has " + std::to_string(flat.size()) + " values, model expects " +
                std::to_string(scalar_count()));
    std::size_t offset = 0;
    for (auto& p : params_) {
        for (auto& v : p.tensor.values_mut()) {
            v = static_cast<T>(flat[offset++]);
        }
    }
}

template <typename T>
Conv<T> Conv<T>::create(ParamStore<T>& store, const std::string& name, int c_in, int c_out, int k, int stride,
                        Rng& rng, Init init, double gain)
{
    require(k == 1 || k == 3, ErrorKind::config, "only 1x1 and 3x3 kernels are supported");
    Conv conv;
    const int fan_in = c_in * k * k;
    conv.kernel = store.add(name + ".weight", {c_out, c_in, k, k}, init, rng, fan_in, gain);
    conv.bias = store.add(name + ".bias", {c_out}, Init::zeros, rng);
    conv.stride = stride;
    conv.padding = k / 2;
    return conv;
}

template class ParamStore<float>;
template class ParamStore<double>;
template struct Conv<float>;
template struct Conv<double>;

}  // namespace obda
