#include "mat/numerics/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mat/error.hpp"

namespace mat {

template <typename T>
void adam_step(std::vector<BasicTensor<T>>& params, AdamState& state) {
  const auto& cfg = state.config;
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError(fmt::format("adam: state tracks {} parameters, got {}", state.m.size(), params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.m[k].size() != params[k].size() || state.v[k].size() != params[k].size()) {
      throw DimensionError(fmt::format("adam: moment buffer {} has {} entries, parameter has shape {}", k,
                                       state.m[k].size(), shape_str(params[k].shape())));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto theta = p.mutable_data();
    const auto g = p.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      theta[i] = static_cast<T>(theta[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

template void adam_step<float>(std::vector<BasicTensor<float>>&, AdamState&);
template void adam_step<double>(std::vector<BasicTensor<double>>&, AdamState&);

}  // namespace mat
