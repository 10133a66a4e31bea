#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mat/data/text.hpp"
#include "mat/data/timeseries.hpp"

namespace mat {

// y_t gains coef * channel[index]_{t - lag}.
struct Coupling {
  std::size_t index = 0;
  double coef = 0.0;
  std::size_t lag = 0;
};

struct SyntheticSpec {
  std::size_t months = 400;
  std::size_t ts_features = 10;  // q, excluding the target
  std::size_t topics = 8;        // k
  std::vector<Coupling> ts_couplings;
  std::vector<Coupling> topic_couplings;
  double noise = 0.1;
  double persistence = 0.5;  // AR(1) coefficient of every driver
  Date start = std::chrono::year{2000} / std::chrono::January / std::chrono::day{1};

  void validate() const;
  std::size_t max_lag() const;
};

struct SyntheticData {
  TimeSeriesTable ts;  // x0..x{q-1}, then y
  TopicSentimentFrame txt;
  SyntheticSpec spec;
  std::uint64_t seed = 0;

  // JSON account of the generating process.
  std::string description() const;
};

// Drivers are unit-variance AR(1) series; topics are tanh of such series.
// The first max_lag draws are burn-in and are not emitted.
SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace mat
