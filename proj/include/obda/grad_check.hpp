#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "obda/tensor.hpp"

namespace obda {

struct GradCoordinate {
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::vector<GradCoordinate> coordinates;  // every checked coordinate
};

// Compares the reverse-mode gradient of scalar f at x against central finite
// differences, coordinate by coordinate:
//   max_i |analytic_i - numeric_i| / max(1e-12, |numeric_i|).
// x is perturbed in place (and restored), so f may ignore its argument and
// read x through a shared handle, e.g. when x is a model parameter.
// max_coords > 0 checks an evenly strided subset of coordinates.
GradCheckResult grad_check_detailed(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                    Tensor<double> x, double eps, std::size_t max_coords = 0);

double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, Tensor<double> x,
                  double eps);

}  // namespace obda
