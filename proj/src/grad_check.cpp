#include "parttrack/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace parttrack {
namespace {

template <typename S>
void check_eps(S eps) {
  if (!(eps >= S(1e-7) && eps <= S(1e-3))) throw ParameterError("grad_check: eps must lie in [1e-7, 1e-3]");
}

template <typename S>
S scalar_of(const Tensor<S>& t) {
  if (t.size() != 1) throw ContractError("grad_check: function must return a scalar");
  return t.value()(0, 0);
}

template <typename S>
S rel_err(S analytic, S numeric) {
  return std::abs(analytic - numeric) / std::max(S(1), std::abs(numeric));
}

}  // namespace

template <typename S>
S grad_check(const std::function<Tensor<S>(const Tensor<S>&)>& f, const Mat<S>& x, S eps) {
  check_eps(eps);
  Tensor<S> input(x, true);
  Tensor<S> out = f(input);
  scalar_of(out);
  out.backward();
  const Mat<S> analytic = input.grad();

  S worst = 0;
  Mat<S> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const S orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const S up = scalar_of(f(Tensor<S>(probe)));
    probe.data()[i] = orig - eps;
    const S down = scalar_of(f(Tensor<S>(probe)));
    probe.data()[i] = orig;
    worst = std::max(worst, rel_err(analytic.data()[i], (up - down) / (2 * eps)));
  }
  return worst;
}

template <typename S>
S grad_check_params(const std::function<Tensor<S>()>& f, std::vector<Tensor<S>> params, S eps,
                    Index max_coords_per_param) {
  check_eps(eps);
  for (auto& p : params) p.zero_grad();
  Tensor<S> out = f();
  scalar_of(out);
  out.backward();

  S worst = 0;
  for (auto& p : params) {
    const Mat<S> analytic = p.grad();
    Mat<S>& value = p.mutable_value();
    const Index n = value.size();
    const Index step = (max_coords_per_param > 0 && n > max_coords_per_param)
                           ? (n + max_coords_per_param - 1) / max_coords_per_param
                           : 1;
    for (Index i = 0; i < n; i += step) {
      const S orig = value.data()[i];
      value.data()[i] = orig + eps;
      const S up = scalar_of(f());
      value.data()[i] = orig - eps;
      const S down = scalar_of(f());
      value.data()[i] = orig;
      worst = std::max(worst, rel_err(analytic.data()[i], (up - down) / (2 * eps)));
    }
  }
  for (auto& p : params) p.zero_grad();
  return worst;
}

template float grad_check(const std::function<Tensor<float>(const Tensor<float>&)>&, const Mat<float>&, float);
template double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>&, const Mat<double>&,
                           double);
template float grad_check_params(const std::function<Tensor<float>()>&, std::vector<Tensor<float>>, float, Index);
template double grad_check_params(const std::function<Tensor<double>()>&, std::vector<Tensor<double>>, double,
                                  Index);

}  // namespace parttrack
