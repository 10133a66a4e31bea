#pragma once

#include <string>
#include <vector>

#include "mat/data/text.hpp"
#include "mat/data/timeseries.hpp"
#include "mat/data/types.hpp"

namespace mat {

// Monthly inputs only. Each sample's ts window carries the non-target
// columns followed by the target. Every anchor month with both lookbacks and
// the full horizon available yields a sample, oldest first.
std::vector<MultimodalSample> align_and_window(const TimeSeriesTable& ts, const TopicSentimentFrame& txt,
                                               const std::string& target_col, std::size_t lookback_ts,
                                               std::size_t lookback_txt, std::size_t horizon);

struct DatasetSplit {
  std::vector<MultimodalSample> train;
  std::vector<MultimodalSample> val;
  std::vector<MultimodalSample> test;
};

// Chronological: validation and test each take max(1, floor(0.15 n)) of the
// latest samples, training keeps the rest.
DatasetSplit split_dataset(const std::vector<MultimodalSample>& samples);

inline constexpr double kVarianceFloor = 1e-8;

struct NormStats {
  std::vector<double> txt_mean, txt_scale;
  std::vector<double> ts_mean, ts_scale;  // last entry is the target channel

  double target_mean() const { return ts_mean.back(); }
  double target_scale() const { return ts_scale.back(); }
  double normalise_target(double y) const { return (y - target_mean()) / target_scale(); }
  double denormalise_target(double z) const { return z * target_scale() + target_mean(); }
};

// Per-column statistics over the distinct months covered by the training
// windows.
NormStats fit_normalizer(const std::vector<MultimodalSample>& train);
std::vector<MultimodalSample> apply_normalizer(const std::vector<MultimodalSample>& samples, const NormStats& stats);
NormStats identity_stats(std::size_t d_txt, std::size_t d_ts);

}  // namespace mat
