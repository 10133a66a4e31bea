#pragma once

// Central-difference gradient oracle for tests. Evaluates the loss in double
// precision, independently of the tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mat/numerics/tensor.hpp"

namespace mat::testing {

// Denominator floor for the relative error; below it the comparison is absolute.
inline constexpr double kGradFloor = 1e-3;

inline double relative_error(double a, double b, double floor = kGradFloor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// `loss` rebuilds the graph from the current parameter values each call.
inline GradCheckResult check_gradients(std::vector<Tensor64>& params, const std::function<Tensor64()>& loss,
                                       double h = 1e-3, double floor = kGradFloor) {
  for (auto& p : params) p.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double up = loss().item();
      values[i] = orig - h;
      const double down = loss().item();
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[k][i], numeric, floor);
      ++result.coordinates;
      if (err > result.max_rel_err) {
        result = {err, k, i, analytic[k][i], numeric, result.coordinates};
      }
    }
  }
  return result;
}

}  // namespace mat::testing
