#pragma once

// Differentiable ops over Tensor<T>. Image-like tensors are channels-first
// (C,H,W); matrices are (rows, cols). Every op validates shapes (config
// error) and rejects non-finite results (numeric error).

#include "obda/tensor.hpp"

namespace obda {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

// x * sigmoid(x), the single nonlinearity used throughout the network.
template <typename T>
Tensor<T> silu(const Tensor<T>& x);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// Cross-correlation of x (C_in,H,W) with kernel (C_out,C_in,k,k). Bias (C_out)
// may be an undefined tensor.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, int stride,
                 int padding);

int conv_output_extent(int extent, int kernel, int stride, int padding);

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x);

// Same values, new shape with equal element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> transpose(const Tensor<T>& m);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Row-wise softmax, stabilized by subtracting each row's maximum.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& m);

}  // namespace obda
