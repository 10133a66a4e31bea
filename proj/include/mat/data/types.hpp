#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mat {

using Date = std::chrono::year_month_day;

// "YYYY-MM-DD", or "YYYY-MM" meaning the first of the month.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& d);
Date month_start(const Date& d);
Date add_months(const Date& d, int months);
// Calendar months from a to b (b later gives a positive count).
int months_between(const Date& a, const Date& b);

// Dense row-major real matrix used by the data pipeline.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

// One modality's lookback window.
struct ModalitySequence {
  Matrix values;  // length x features
  std::vector<Date> timestamps;
  std::vector<std::string> feature_names;

  std::size_t length() const { return values.rows; }
  std::size_t features() const { return values.cols; }
};

// Paired text and time-series windows ending at the same anchor month. The
// time-series window carries the target as its last column.
struct MultimodalSample {
  ModalitySequence txt;
  ModalitySequence ts;
  std::vector<double> y_hist;    // target over the ts window
  std::vector<double> y_future;  // target for the horizon
  Date anchor{};
  std::vector<Date> future_dates;
};

}  // namespace mat
