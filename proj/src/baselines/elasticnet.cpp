#include "mat/baselines/elasticnet.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "mat/error.hpp"
#include "mat/model/checkpoint.hpp"

namespace mat {

namespace {

void check_finite(const Matrix& x, const std::vector<double>& y) {
  if (x.rows != y.size()) throw DimensionError(fmt::format("design has {} rows but {} targets", x.rows, y.size()));
  for (std::size_t k = 0; k < x.values.size(); ++k) {
    if (!std::isfinite(x.values[k])) {
      throw DataError(fmt::format("non-finite feature at row {}, column {}", k / x.cols, k % x.cols));
    }
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw DataError(fmt::format("non-finite target at row {}", i));
  }
}

}  // namespace

double elastic_net_objective(const ElasticNetParams& p, const Matrix& x, const std::vector<double>& y) {
  const auto pred = elastic_net_predict(p, x);
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sse += (y[i] - pred[i]) * (y[i] - pred[i]);
  double l1 = 0.0, l2 = 0.0;
  for (double w : p.weights) {
    l1 += std::abs(w);
    l2 += w * w;
  }
  return sse / (2.0 * static_cast<double>(y.size())) + p.alpha * (p.l1_ratio * l1 + 0.5 * (1.0 - p.l1_ratio) * l2);
}

double elastic_net_coordinate(double rho, double z, double alpha, double l1_ratio) {
  const double denom = z + alpha * (1.0 - l1_ratio);
  if (denom <= 0.0) return 0.0;  // an all-zero column with no ridge term
  const double shrunk = std::max(std::abs(rho) - alpha * l1_ratio, 0.0);
  return std::copysign(shrunk, rho) / denom;
}

ElasticNetParams elastic_net_fit(const Matrix& x, const std::vector<double>& y, double alpha, double l1_ratio,
                                 const ElasticNetOptions& opts) {
  if (!(alpha >= 0.0)) throw ConfigError(fmt::format("elastic net alpha {} must be non-negative", alpha));
  if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) throw ConfigError(fmt::format("l1_ratio {} outside [0, 1]", l1_ratio));
  if (y.empty()) throw DataError("elastic net needs at least one sample");
  check_finite(x, y);

  const std::size_t n = x.rows, p = x.cols;
  const double inv_n = 1.0 / static_cast<double>(n);
  ElasticNetParams out;
  out.weights.assign(p, 0.0);
  out.alpha = alpha;
  out.l1_ratio = l1_ratio;

  std::vector<double> z(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) z[j] += x(i, j) * x(i, j);
  for (auto& v : z) v *= inv_n;

  std::vector<double> r = y;
  auto refit_intercept = [&] {
    if (!opts.fit_intercept) return 0.0;
    double shift = 0.0;
    for (double v : r) shift += v;
    shift *= inv_n;
    out.intercept += shift;
    for (auto& v : r) v -= shift;
    return std::abs(shift);
  };
  refit_intercept();

  for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double largest = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double old = out.weights[j];
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += x(i, j) * r[i];
      rho = rho * inv_n + z[j] * old;
      const double w = elastic_net_coordinate(rho, z[j], alpha, l1_ratio);
      if (w != old) {
        const double delta = w - old;
        for (std::size_t i = 0; i < n; ++i) r[i] -= x(i, j) * delta;
        out.weights[j] = w;
        largest = std::max(largest, std::abs(delta));
      }
    }
    largest = std::max(largest, refit_intercept());
    if (opts.objective_trace) opts.objective_trace->push_back(elastic_net_objective(out, x, y));
    if (largest < opts.tol) break;
  }
  return out;
}

std::vector<double> elastic_net_predict(const ElasticNetParams& p, const Matrix& x) {
  if (x.cols != p.weights.size()) {
    throw DimensionError(fmt::format("design has {} columns, model has {} weights", x.cols, p.weights.size()));
  }
  std::vector<double> out(x.rows, p.intercept);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) out[i] += x(i, j) * p.weights[j];
  return out;
}

Matrix elastic_net_design(const std::vector<MultimodalSample>& samples) {
  if (samples.empty()) return {};
  const auto& first = samples.front();
  const std::size_t width = first.txt.values.values.size() + first.ts.values.values.size();
  Matrix x(samples.size(), width);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.txt.values.values.size() + s.ts.values.values.size() != width) {
      throw DataError(fmt::format("sample {} has a different window shape", i));
    }
    std::size_t c = 0;
    for (double v : s.txt.values.values) x(i, c++) = v;
    for (double v : s.ts.values.values) x(i, c++) = v;
  }
  return x;
}

namespace {

Matrix design_for(const ElasticNetForecaster& m, const std::vector<MultimodalSample>& samples) {
  for (const auto& s : samples) {
    if (s.txt.length() != m.lookback_txt || s.txt.features() != m.d_txt || s.ts.length() != m.lookback_ts ||
        s.ts.features() != m.d_ts) {
      throw DataError(fmt::format("sample windows are {}x{} and {}x{}, model expects {}x{} and {}x{}", s.txt.length(),
                                  s.txt.features(), s.ts.length(), s.ts.features(), m.lookback_txt, m.d_txt,
                                  m.lookback_ts, m.d_ts));
    }
  }
  return elastic_net_design(samples);
}

std::vector<double> future_column(const std::vector<MultimodalSample>& samples, std::size_t k) {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.y_future.size() <= k) throw DataError("sample future is shorter than the horizon");
    y.push_back(s.y_future[k]);
  }
  return y;
}

}  // namespace

std::vector<std::vector<double>> ElasticNetForecaster::predict_all(const std::vector<MultimodalSample>& samples) const {
  const auto x = design_for(*this, samples);
  std::vector<std::vector<double>> out(samples.size(), std::vector<double>(horizon));
  for (std::size_t k = 0; k < horizon; ++k) {
    const auto col = elastic_net_predict(steps.at(k), x);
    for (std::size_t i = 0; i < samples.size(); ++i) out[i][k] = col[i];
  }
  return out;
}

std::vector<double> ElasticNetForecaster::predict(const MultimodalSample& sample) const {
  return predict_all({sample}).front();
}

ElasticNetForecaster fit_elastic_net_forecaster(const std::vector<MultimodalSample>& train,
                                                const std::vector<MultimodalSample>& val,
                                                const std::vector<double>& alphas, double l1_ratio) {
  if (train.empty()) throw DataError("elastic net: empty training set");
  if (val.empty()) throw DataError("elastic net: empty validation set");
  if (alphas.empty()) throw ConfigError("elastic net: empty alpha grid");
  ElasticNetForecaster m;
  const auto& s0 = train.front();
  m.d_txt = s0.txt.features();
  m.d_ts = s0.ts.features();
  m.lookback_txt = s0.txt.length();
  m.lookback_ts = s0.ts.length();
  m.horizon = s0.y_future.size();
  if (m.horizon == 0) throw DataError("elastic net: samples carry no future targets");

  const auto x_train = design_for(m, train);
  const auto x_val = design_for(m, val);
  for (std::size_t k = 0; k < m.horizon; ++k) {
    const auto y_train = future_column(train, k);
    const auto y_val = future_column(val, k);
    double best_mse = std::numeric_limits<double>::infinity();
    ElasticNetParams best;
    for (double alpha : alphas) {
      auto fit = elastic_net_fit(x_train, y_train, alpha, l1_ratio);
      const auto pred = elastic_net_predict(fit, x_val);
      double se = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - y_val[i]) * (pred[i] - y_val[i]);
      const double mse = se / static_cast<double>(pred.size());
      if (mse < best_mse) {
        best_mse = mse;
        best = std::move(fit);
      }
    }
    m.steps.push_back(std::move(best));
  }
  return m;
}

void save_elastic_net_checkpoint(const ElasticNetForecaster& m, const std::filesystem::path& path,
                                 std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["d_txt"] = m.d_txt;
  j["d_ts"] = m.d_ts;
  j["lookback_txt"] = m.lookback_txt;
  j["lookback_ts"] = m.lookback_ts;
  j["horizon"] = m.horizon;
  auto alphas = nlohmann::ordered_json::array();
  auto ratios = nlohmann::ordered_json::array();
  Checkpoint ckpt{"elasticnet", seed, "", {}};
  for (std::size_t k = 0; k < m.steps.size(); ++k) {
    const auto& s = m.steps[k];
    if (s.weights.size() != m.width()) throw DimensionError("elastic net step has the wrong number of weights");
    alphas.push_back(s.alpha);
    ratios.push_back(s.l1_ratio);
    ckpt.tensors.push_back({fmt::format("step{}.weights", k), Shape{s.weights.size()},
                            std::vector<float>(s.weights.begin(), s.weights.end())});
    ckpt.tensors.push_back({fmt::format("step{}.intercept", k), Shape{1}, {static_cast<float>(s.intercept)}});
  }
  j["alpha"] = alphas;
  j["l1_ratio"] = ratios;
  ckpt.config_json = j.dump();
  write_checkpoint(path, ckpt);
}

LoadedElasticNet load_elastic_net_checkpoint(const std::filesystem::path& path) {
  const auto ckpt = read_checkpoint(path);
  if (ckpt.kind != "elasticnet") {
    throw CheckpointHeaderError(fmt::format("checkpoint holds a '{}' model, not elasticnet", ckpt.kind));
  }
  LoadedElasticNet out;
  out.seed = ckpt.seed;
  auto& m = out.model;
  std::vector<double> alphas, ratios;
  try {
    const auto j = nlohmann::json::parse(ckpt.config_json);
    m.d_txt = j.at("d_txt").get<std::size_t>();
    m.d_ts = j.at("d_ts").get<std::size_t>();
    m.lookback_txt = j.at("lookback_txt").get<std::size_t>();
    m.lookback_ts = j.at("lookback_ts").get<std::size_t>();
    m.horizon = j.at("horizon").get<std::size_t>();
    alphas = j.at("alpha").get<std::vector<double>>();
    ratios = j.at("l1_ratio").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointHeaderError(std::string("checkpoint config: ") + e.what());
  }
  if (alphas.size() != m.horizon || ratios.size() != m.horizon) {
    throw CheckpointHeaderError("checkpoint config: one alpha and l1_ratio per horizon step expected");
  }
  std::vector<TensorSpec> census;
  for (std::size_t k = 0; k < m.horizon; ++k) {
    census.push_back({fmt::format("step{}.weights", k), Shape{m.width()}});
    census.push_back({fmt::format("step{}.intercept", k), Shape{1}});
  }
  verify_census(ckpt, census);
  for (std::size_t k = 0; k < m.horizon; ++k) {
    const auto& w = ckpt.tensors[2 * k].values;
    m.steps.push_back({std::vector<double>(w.begin(), w.end()), ckpt.tensors[2 * k + 1].values[0], alphas[k], ratios[k]});
  }
  return out;
}

}  // namespace mat
