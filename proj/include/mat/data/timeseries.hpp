#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mat/data/types.hpp"

namespace mat {

// Columns of real values indexed by strictly increasing dates.
struct TimeSeriesTable {
  std::vector<Date> timestamps;
  std::vector<std::string> names;
  Matrix values;  // timestamps x names
  std::string frequency;  // "monthly" or "sub-monthly"

  std::size_t length() const { return timestamps.size(); }
  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  void validate() const;
};

struct CsvSchema {
  std::string date_column = "date";
  // Columns to keep, in this order; empty keeps every non-date column.
  std::vector<std::string> columns;
};

struct CsvLoad {
  TimeSeriesTable table;
  std::size_t filled = 0;  // empty cells replaced by the fill rule
};

// Empty cells take the previous value in their column; a leading gap takes
// the first value that follows it.
CsvLoad parse_timeseries_csv(std::istream& in, const CsvSchema& schema = {}, const std::string& origin = "<stream>");
CsvLoad load_timeseries_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_timeseries_csv(const std::filesystem::path& path, const TimeSeriesTable& table);

// "monthly" when no two timestamps share a calendar month.
std::string infer_frequency(const std::vector<Date>& timestamps);

// One row per calendar month (dated the 1st), the mean of that month's rows.
// A calendar month between the first and last with no observation is an error.
TimeSeriesTable downsample_monthly(const TimeSeriesTable& table);

// Consecutive first-of-month dates from first to last inclusive.
std::vector<Date> monthly_calendar(const Date& first, const Date& last);

}  // namespace mat
