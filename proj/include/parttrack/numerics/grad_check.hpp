#pragma once

#include <functional>
#include <vector>

#include "parttrack/numerics/tensor.hpp"

namespace parttrack {

/// Compares the reverse-mode gradient of a scalar function against central
/// differences. Returns max_i |analytic_i - numeric_i| / max(1, |numeric_i|).
///
/// Throws ParameterError if eps is outside [1e-7, 1e-3] and ContractError if
/// f does not return a 1x1 tensor.
template <typename S>
S grad_check(const std::function<Tensor<S>(const Tensor<S>&)>& f, const Mat<S>& x, S eps);

/// Same check over a set of leaf parameters captured by f. Each parameter's
/// value is perturbed in place and restored. When max_coords_per_param > 0
/// only that many evenly spaced coordinates per parameter are probed.
template <typename S>
S grad_check_params(const std::function<Tensor<S>()>& f, std::vector<Tensor<S>> params, S eps,
                    Index max_coords_per_param = 0);

}  // namespace parttrack
