#include "mat/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "mat/error.hpp"

namespace mat {

namespace {

void require_monthly(const std::vector<Date>& dates, const char* what) {
  for (std::size_t t = 0; t < dates.size(); ++t) {
    if (dates[t].day() != std::chrono::day{1} || (t > 0 && months_between(dates[t - 1], dates[t]) != 1)) {
      throw DataError(fmt::format("{} must be consecutive first-of-month dates (offending date {})", what,
                                  format_iso_date(dates[t])));
    }
  }
}

}  // namespace

std::vector<MultimodalSample> align_and_window(const TimeSeriesTable& ts, const TopicSentimentFrame& txt,
                                               const std::string& target_col, std::size_t lookback_ts,
                                               std::size_t lookback_txt, std::size_t horizon) {
  if (lookback_ts == 0 || lookback_txt == 0) throw DataError("lookbacks must be at least 1");
  if (horizon == 0) throw DataError("horizon must be at least 1");
  if (ts.length() == 0 || txt.length() == 0) throw DataError("cannot window an empty series");
  require_monthly(ts.timestamps, "time-series dates");
  require_monthly(txt.timestamps, "text frame dates");
  const std::size_t target = ts.column_index(target_col);

  const Date first = std::max(ts.timestamps.front(), txt.timestamps.front());
  const Date last = std::min(ts.timestamps.back(), txt.timestamps.back());
  const int overlap = first <= last ? months_between(first, last) + 1 : 0;
  const std::size_t need = std::max(lookback_ts, lookback_txt);
  if (overlap < static_cast<int>(need)) {
    throw DataError(overlap <= 0 ? fmt::format("time-series ({} .. {}) and text ({} .. {}) do not overlap",
                                               format_iso_date(ts.timestamps.front()), format_iso_date(ts.timestamps.back()),
                                               format_iso_date(txt.timestamps.front()), format_iso_date(txt.timestamps.back()))
                                 : fmt::format("usable range {} .. {} has {} months, lookback needs {}",
                                               format_iso_date(first), format_iso_date(last), overlap, need));
  }
  const auto ts0 = static_cast<std::size_t>(months_between(ts.timestamps.front(), first));
  const auto txt0 = static_cast<std::size_t>(months_between(txt.timestamps.front(), first));
  const auto n = static_cast<std::size_t>(overlap);

  std::vector<std::size_t> cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < ts.names.size(); ++j)
    if (j != target) cols.push_back(j);
  cols.push_back(target);
  for (auto j : cols) names.push_back(ts.names[j]);

  std::vector<MultimodalSample> out;
  if (n < need + horizon) return out;
  for (std::size_t a = need - 1; a + horizon < n; ++a) {
    MultimodalSample s;
    s.anchor = ts.timestamps[ts0 + a];
    s.ts.values = Matrix(lookback_ts, cols.size());
    s.ts.feature_names = names;
    for (std::size_t r = 0; r < lookback_ts; ++r) {
      const std::size_t src = ts0 + a + 1 - lookback_ts + r;
      s.ts.timestamps.push_back(ts.timestamps[src]);
      for (std::size_t c = 0; c < cols.size(); ++c) s.ts.values(r, c) = ts.values(src, cols[c]);
      s.y_hist.push_back(ts.values(src, target));
    }
    s.txt.values = Matrix(lookback_txt, txt.topics.size());
    s.txt.feature_names = txt.topics;
    for (std::size_t r = 0; r < lookback_txt; ++r) {
      const std::size_t src = txt0 + a + 1 - lookback_txt + r;
      s.txt.timestamps.push_back(txt.timestamps[src]);
      for (std::size_t c = 0; c < txt.topics.size(); ++c) s.txt.values(r, c) = txt.scores(src, c);
    }
    for (std::size_t k = 1; k <= horizon; ++k) {
      s.future_dates.push_back(ts.timestamps[ts0 + a + k]);
      s.y_future.push_back(ts.values(ts0 + a + k, target));
    }
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<MultimodalSample>& samples) {
  const std::size_t n = samples.size();
  if (n < 3) throw DataError(fmt::format("need at least 3 samples to split, have {}", n));
  for (std::size_t i = 1; i < n; ++i) {
    if (!(samples[i - 1].anchor < samples[i].anchor)) throw DataError("samples must have strictly increasing anchors");
  }
  const std::size_t holdout = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(n))));
  const std::size_t n_train = n - 2 * holdout;
  DatasetSplit split;
  split.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train),
                   samples.begin() + static_cast<std::ptrdiff_t>(n_train + holdout));
  split.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train + holdout), samples.end());
  return split;
}

NormStats fit_normalizer(const std::vector<MultimodalSample>& train) {
  if (train.empty()) throw DataError("cannot fit a normalizer on an empty training split");
  // One row per distinct month so overlapping windows do not reweight months.
  std::map<Date, std::vector<double>> txt_rows, ts_rows;
  for (const auto& s : train) {
    for (std::size_t r = 0; r < s.txt.length(); ++r) {
      std::vector<double> row(s.txt.values.values.begin() + static_cast<std::ptrdiff_t>(r * s.txt.features()),
                              s.txt.values.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * s.txt.features()));
      txt_rows.emplace(s.txt.timestamps[r], std::move(row));
    }
    for (std::size_t r = 0; r < s.ts.length(); ++r) {
      std::vector<double> row(s.ts.values.values.begin() + static_cast<std::ptrdiff_t>(r * s.ts.features()),
                              s.ts.values.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * s.ts.features()));
      ts_rows.emplace(s.ts.timestamps[r], std::move(row));
    }
  }
  auto stats = [](const std::map<Date, std::vector<double>>& rows, std::vector<double>& mean, std::vector<double>& scale) {
    const std::size_t d = rows.begin()->second.size();
    mean.assign(d, 0.0);
    scale.assign(d, 0.0);
    for (const auto& [date, row] : rows)
      for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (auto& m : mean) m /= static_cast<double>(rows.size());
    for (const auto& [date, row] : rows)
      for (std::size_t j = 0; j < d; ++j) scale[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
    for (auto& s : scale) s = std::sqrt(std::max(s / static_cast<double>(rows.size()), kVarianceFloor));
  };
  NormStats out;
  stats(txt_rows, out.txt_mean, out.txt_scale);
  stats(ts_rows, out.ts_mean, out.ts_scale);
  return out;
}

std::vector<MultimodalSample> apply_normalizer(const std::vector<MultimodalSample>& samples, const NormStats& stats) {
  std::vector<MultimodalSample> out = samples;
  for (auto& s : out) {
    if (s.txt.features() != stats.txt_mean.size() || s.ts.features() != stats.ts_mean.size()) {
      throw DataError("normalizer was fitted on a different feature layout");
    }
    for (std::size_t r = 0; r < s.txt.length(); ++r)
      for (std::size_t j = 0; j < s.txt.features(); ++j)
        s.txt.values(r, j) = (s.txt.values(r, j) - stats.txt_mean[j]) / stats.txt_scale[j];
    for (std::size_t r = 0; r < s.ts.length(); ++r)
      for (std::size_t j = 0; j < s.ts.features(); ++j)
        s.ts.values(r, j) = (s.ts.values(r, j) - stats.ts_mean[j]) / stats.ts_scale[j];
    for (auto& y : s.y_hist) y = stats.normalise_target(y);
    for (auto& y : s.y_future) y = stats.normalise_target(y);
  }
  return out;
}

NormStats identity_stats(std::size_t d_txt, std::size_t d_ts) {
  return {std::vector<double>(d_txt, 0.0), std::vector<double>(d_txt, 1.0), std::vector<double>(d_ts, 0.0),
          std::vector<double>(d_ts, 1.0)};
}

}  // namespace mat
