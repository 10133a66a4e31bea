#include "mat/data/synthetic.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "mat/error.hpp"

namespace mat {

void SyntheticSpec::validate() const {
  if (months == 0) throw ConfigError("synth.months must be positive");
  if (ts_features == 0) throw ConfigError("synth.ts_features must be positive");
  if (topics == 0) throw ConfigError("synth.topics must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("synth.noise must be non-negative");
  if (!(persistence > -1.0 && persistence < 1.0)) throw ConfigError("synth.persistence must lie in (-1, 1)");
  for (const auto& c : ts_couplings) {
    if (c.index >= ts_features) {
      throw ConfigError(fmt::format("synth: ts coupling index {} out of range (q = {})", c.index, ts_features));
    }
    if (!std::isfinite(c.coef)) throw ConfigError("synth: non-finite coupling coefficient");
  }
  for (const auto& c : topic_couplings) {
    if (c.index >= topics) throw ConfigError(fmt::format("synth: topic coupling index {} out of range (k = {})", c.index, topics));
    if (!std::isfinite(c.coef)) throw ConfigError("synth: non-finite coupling coefficient");
  }
  if (!start.ok() || start.day() != std::chrono::day{1}) throw ConfigError("synth.start must be a first-of-month date");
}

std::size_t SyntheticSpec::max_lag() const {
  std::size_t lag = 0;
  for (const auto& c : ts_couplings) lag = std::max(lag, c.lag);
  for (const auto& c : topic_couplings) lag = std::max(lag, c.lag);
  return lag;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t burn = spec.max_lag();
  const std::size_t total = spec.months + burn;
  const std::size_t q = spec.ts_features, k = spec.topics;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double phi = spec.persistence, innov = std::sqrt(1.0 - phi * phi);

  // Series are drawn one channel at a time so adding a channel leaves the others intact.
  std::vector<std::vector<double>> x(q, std::vector<double>(total)), s(k, std::vector<double>(total));
  for (std::size_t j = 0; j < q; ++j) {
    double state = normal(rng);
    for (std::size_t t = 0; t < total; ++t) {
      if (t > 0) state = phi * state + innov * normal(rng);
      x[j][t] = state;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    double state = normal(rng);
    for (std::size_t t = 0; t < total; ++t) {
      if (t > 0) state = phi * state + innov * normal(rng);
      s[i][t] = std::tanh(state);
    }
  }
  std::vector<double> y(total, 0.0);
  for (std::size_t t = burn; t < total; ++t) {
    double v = 0.0;
    for (const auto& c : spec.ts_couplings) v += c.coef * x[c.index][t - c.lag];
    for (const auto& c : spec.topic_couplings) v += c.coef * s[c.index][t - c.lag];
    y[t] = v + spec.noise * normal(rng);
  }

  SyntheticData out;
  out.spec = spec;
  out.seed = seed;
  auto& ts = out.ts;
  for (std::size_t j = 0; j < q; ++j) ts.names.push_back(fmt::format("x{}", j));
  ts.names.push_back("y");
  ts.values = Matrix(spec.months, q + 1);
  ts.frequency = "monthly";
  auto& txt = out.txt;
  for (std::size_t i = 0; i < k; ++i) txt.topics.push_back(fmt::format("topic{}", i));
  txt.scores = Matrix(spec.months, k);
  txt.coverage.assign(spec.months * k, 1);
  txt.sentence_counts.assign(k, 0);
  for (std::size_t t = 0; t < spec.months; ++t) {
    const Date d = add_months(spec.start, static_cast<int>(t));
    ts.timestamps.push_back(d);
    txt.timestamps.push_back(d);
    for (std::size_t j = 0; j < q; ++j) ts.values(t, j) = x[j][burn + t];
    ts.values(t, q) = y[burn + t];
    for (std::size_t i = 0; i < k; ++i) txt.scores(t, i) = s[i][burn + t];
  }
  return out;
}

std::string SyntheticData::description() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["months"] = spec.months;
  j["start"] = format_iso_date(spec.start);
  j["ts_features"] = spec.ts_features;
  j["topics"] = spec.topics;
  j["noise"] = spec.noise;
  j["persistence"] = spec.persistence;
  j["burn_in"] = spec.max_lag();
  j["target"] = "y";
  auto couplings = [](const std::vector<Coupling>& cs, const char* prefix) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : cs) {
      nlohmann::ordered_json e;
      e["channel"] = fmt::format("{}{}", prefix, c.index);
      e["coef"] = c.coef;
      e["lag"] = c.lag;
      arr.push_back(e);
    }
    return arr;
  };
  j["ts_couplings"] = couplings(spec.ts_couplings, "x");
  j["topic_couplings"] = couplings(spec.topic_couplings, "topic");
  j["model"] = "y_t = sum coef * channel_{t-lag} + noise * N(0,1); x_j AR(1) unit variance; topic_i = tanh(AR(1))";
  return j.dump(2);
}

}  // namespace mat
