#pragma once

#include <cmath>
#include <functional>
#include <type_traits>
#include <vector>

#include "uav/errors.hpp"
#include "uav/tensor.hpp"

namespace uav {

// Central-difference gradient of a scalar-valued function of x, perturbing
// one element at a time: (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
// The oracle never touches the reverse-mode path it is used to check.
template <class S, class F>
Tensor<S> finite_difference_grad(F&& f, const Tensor<S>& x, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("finite_difference_grad: eps must be positive");
  auto eval = [&]() -> double {
    if constexpr (std::is_invocable_v<F&, const Tensor<S>&>)
      return static_cast<double>(f(x));
    else
      return static_cast<double>(f());
  };
  Tensor<S> g = Tensor<S>::zeros(x.shape);
  std::vector<S>& xd = *x.data;
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const S keep = xd[i];
    xd[i] = keep + static_cast<S>(eps);
    const double fp = eval();
    xd[i] = keep - static_cast<S>(eps);
    const double fm = eval();
    xd[i] = keep;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_difference_grad: non-finite function evaluation");
    g.at(i) = static_cast<S>((fp - fm) / (2.0 * eps));
  }
  return g;
}

// Relative error with a floor so exact-zero pairs compare as equal.
inline double rel_err(double a, double b, double floor = 1e-12) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

}  // namespace uav
