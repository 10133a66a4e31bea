#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mat/data/dataset.hpp"
#include "mat/data/types.hpp"

namespace mat {

struct ElasticNetParams {
  std::vector<double> weights;
  double intercept = 0.0;
  double alpha = 0.0;
  double l1_ratio = 0.5;
};

struct ElasticNetOptions {
  std::size_t max_sweeps = 1000;
  double tol = 1e-6;  // on the largest coordinate change in a sweep
  bool fit_intercept = true;
  // When set, receives the objective after every sweep.
  std::vector<double>* objective_trace = nullptr;
};

// 1/(2n) ||y - Xw - b||^2 + alpha (l1_ratio ||w||_1 + (1 - l1_ratio)/2 ||w||^2)
double elastic_net_objective(const ElasticNetParams& p, const Matrix& x, const std::vector<double>& y);

// Closed-form coordinate minimiser given rho = x_j . r_partial / n and
// z = ||x_j||^2 / n.
double elastic_net_coordinate(double rho, double z, double alpha, double l1_ratio);

// Cyclic coordinate descent from w = 0.
ElasticNetParams elastic_net_fit(const Matrix& x, const std::vector<double>& y, double alpha, double l1_ratio,
                                 const ElasticNetOptions& opts = {});

std::vector<double> elastic_net_predict(const ElasticNetParams& p, const Matrix& x);

inline const std::vector<double> kElasticNetAlphas{1e-3, 1e-2, 1e-1, 1.0};
inline constexpr double kElasticNetL1Ratio = 0.5;

// One independent regression per horizon step over the flattened text and
// time-series windows (the latter already holds the target history).
struct ElasticNetForecaster {
  std::size_t d_txt = 0, d_ts = 0, lookback_txt = 0, lookback_ts = 0, horizon = 0;
  std::vector<ElasticNetParams> steps;

  std::size_t width() const { return lookback_txt * d_txt + lookback_ts * d_ts; }
  std::vector<double> predict(const MultimodalSample& sample) const;
  std::vector<std::vector<double>> predict_all(const std::vector<MultimodalSample>& samples) const;
};

Matrix elastic_net_design(const std::vector<MultimodalSample>& samples);

// Fits every alpha in the grid on `train` and keeps, per horizon step, the
// one with the lowest validation MSE (ties go to the smaller alpha).
ElasticNetForecaster fit_elastic_net_forecaster(const std::vector<MultimodalSample>& train,
                                                const std::vector<MultimodalSample>& val,
                                                const std::vector<double>& alphas = kElasticNetAlphas,
                                                double l1_ratio = kElasticNetL1Ratio);

void save_elastic_net_checkpoint(const ElasticNetForecaster& model, const std::filesystem::path& path,
                                 std::uint64_t seed = 0);
struct LoadedElasticNet {
  ElasticNetForecaster model;
  std::uint64_t seed = 0;
};
LoadedElasticNet load_elastic_net_checkpoint(const std::filesystem::path& path);

}  // namespace mat
