#pragma once

#include <random>

#include "obda/layers.hpp"

namespace obda::testing {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) {
        x = static_cast<T>(dist(rng));
    }
    return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape() != b.shape()) {
        return false;
    }
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a[i] != b[i]) {
            return false;
        }
    }
    return true;
}

// Random linear functional <w, y>: makes every output coordinate matter.
template <typename T>
Tensor<T> project(const Tensor<T>& y, const Tensor<T>& w)
{
    return sum(mul(y, w));
}

}  // namespace obda::testing
