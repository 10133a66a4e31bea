#pragma once

#include <cstdint>
#include <vector>

#include "mat/numerics/tensor.hpp"

namespace mat {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one per parameter, in parameter order.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}
};

// One bias-corrected Adam update using each parameter's accumulated grad.
// Parameters without a grad buffer are treated as having zero gradient.
// Moment buffers are allocated on the first call.
template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, AdamState& state);

}  // namespace mat
