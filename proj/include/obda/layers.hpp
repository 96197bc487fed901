#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "obda/ops.hpp"

namespace obda {

using Rng = std::mt19937_64;

enum class Init {
    fan_in_uniform,  // U(-a, a) with a = gain * sqrt(3 / fan_in)
    zeros,
    identity,        // square 1x1 kernels only
};

template <typename T>
struct NamedParam {
    std::string name;
    Tensor<T> tensor;
};

// Owns every trainable tensor of a model, in registration order. Layers keep
// handles to the same tensors, so updates made here are visible to them.
template <typename T>
class ParamStore {
public:
    Tensor<T> add(const std::string& name, Shape shape, Init init, Rng& rng, int fan_in = 1, double gain = 1.0);

    const std::vector<NamedParam<T>>& params() const { return params_; }
    std::vector<NamedParam<T>>& params() { return params_; }
    std::size_t scalar_count() const;
    const Tensor<T>& find(const std::string& name) const;

    void zero_grad();

    // Flat f32 image of all parameters in registration order.
    std::vector<float> flatten() const;
    void load_flat(const std::vector<float>& flat);

private:
    std::vector<NamedParam<T>> params_;
};

template <typename T>
struct Conv {
    Tensor<T> kernel;
    Tensor<T> bias;
    int stride = 1;
    int padding = 0;

    static Conv create(ParamStore<T>& store, const std::string& name, int c_in, int c_out, int k, int stride,
                       Rng& rng, Init init = Init::fan_in_uniform, double gain = 1.0);

    Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, kernel, bias, stride, padding); }
    int out_channels() const { return kernel.dim(0); }
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template struct Conv<float>;
extern template struct Conv<double>;

}  // namespace obda
