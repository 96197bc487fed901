#include "obda/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace obda {

GradCheckResult grad_check_detailed(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                    Tensor<double> x, double eps, std::size_t max_coords)
{
    require(eps > 0.0, ErrorKind::config, "grad_check: eps must be positive");
    const bool was_tracked = x.requires_grad();
    x.set_requires_grad(true);
    x.zero_grad();
    {
        Tensor<double> y = f(x);
        y.backward();
    }
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) {
        std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
    }
    x.zero_grad();
    x.set_requires_grad(was_tracked);

    auto evaluate = [&]() {
        NoGradGuard no_grad;
        const double v = f(x).item();
        require(std::isfinite(v), ErrorKind::numeric, "grad_check: non-finite function value");
        return v;
    };

    const std::size_t n = x.numel();
    const std::size_t step = (max_coords == 0 || max_coords >= n) ? 1 : n / max_coords;
    GradCheckResult result;
    auto values = x.values_mut();
    for (std::size_t i = 0; i < n; i += step) {
        const double original = values[i];
        values[i] = original + eps;
        const double plus = evaluate();
        values[i] = original - eps;
        const double minus = evaluate();
        values[i] = original;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / std::max(1e-12, std::abs(numeric));
        if (i == 0 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
            result.worst_analytic = analytic[i];
            result.worst_numeric = numeric;
        }
        result.coordinates.push_back({i, analytic[i], numeric});
    }
    return result;
}

double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, Tensor<double> x, double eps)
{
    return grad_check_detailed(f, std::move(x), eps).max_relative_error;
}

}  // namespace obda
