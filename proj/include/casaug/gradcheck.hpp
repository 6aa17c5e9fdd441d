// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "casaug/errors.hpp"
#include "casaug/tensor.hpp"

namespace casaug {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares tape gradients of `loss_fn` against central differences over
/// every coordinate of `params`. Relative error uses max(|a|, |b|, 1e-8) as
/// denominator. `loss_fn` must build its graph from the current parameter
/// values and be deterministic.
inline GradCheckResult grad_check_detailed(const std::function<Tensor()>& loss_fn,
                                           std::vector<Tensor> params,
                                           double eps = 1e-5) {
  if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");

  const auto evaluate = [&] {
    NoGradScope no_grad;
    return loss_fn().item();
  };
  const double base = evaluate();
  if (evaluate() != base) {
    throw ContractError("grad_check: loss function is not deterministic");
  }

  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = loss_fn();
    }
    tape.backward(loss);
  }

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = evaluate();
      values[i] = saved - eps;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic[i] - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = pi;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

inline double grad_check(const std::function<Tensor()>& loss_fn,
                         std::vector<Tensor> params, double eps = 1e-5) {
  return grad_check_detailed(loss_fn, std::move(params), eps).max_relative_error;
}

}  // namespace casaug
