#include "mat/data/timeseries.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include <fmt/format.h>

#include "mat/error.hpp"

namespace mat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::size_t TimeSeriesTable::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return j;
  throw DataError(fmt::format("no column named '{}'", name));
}

std::vector<double> TimeSeriesTable::column(const std::string& name) const {
  const auto j = column_index(name);
  std::vector<double> out(length());
  for (std::size_t t = 0; t < length(); ++t) out[t] = values(t, j);
  return out;
}

void TimeSeriesTable::validate() const {
  if (values.rows != timestamps.size() || values.cols != names.size()) {
    throw DataError("time-series table: value matrix does not match timestamps and columns");
  }
  for (std::size_t t = 1; t < timestamps.size(); ++t) {
    if (!(timestamps[t - 1] < timestamps[t])) {
      throw DataError(fmt::format("time-series table: dates not strictly increasing at {}",
                                  format_iso_date(timestamps[t])));
    }
  }
}

std::string infer_frequency(const std::vector<Date>& timestamps) {
  for (std::size_t t = 1; t < timestamps.size(); ++t) {
    if (month_start(timestamps[t]) == month_start(timestamps[t - 1])) return "sub-monthly";
  }
  return "monthly";
}

CsvLoad parse_timeseries_csv(std::istream& in, const CsvSchema& schema, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty file, expected a header row", origin));
  const auto header = split_commas(line);
  std::size_t date_col = header.size();
  std::vector<std::size_t> keep;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == schema.date_column && date_col == header.size()) date_col = j;
  }
  if (date_col == header.size()) throw DataError(fmt::format("{}: no '{}' column in header", origin, schema.date_column));
  if (schema.columns.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j == date_col) continue;
      keep.push_back(j);
      names.emplace_back(header[j]);
    }
  } else {
    for (const auto& want : schema.columns) {
      std::size_t found = header.size();
      for (std::size_t j = 0; j < header.size(); ++j)
        if (j != date_col && header[j] == want) found = j;
      if (found == header.size()) throw DataError(fmt::format("{}: no column named '{}'", origin, want));
      keep.push_back(found);
      names.push_back(want);
    }
  }
  if (keep.empty()) throw DataError(fmt::format("{}: no value columns", origin));

  std::vector<Date> dates;
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> missing;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw DataError(fmt::format("{}: row {} has {} cells, header has {}", origin, row_no, cells.size(), header.size()));
    }
    Date d;
    try {
      d = parse_iso_date(cells[date_col]);
    } catch (const DataError&) {
      throw DataError(fmt::format("{}: row {}, column '{}': invalid date '{}'", origin, row_no, schema.date_column,
                                  cells[date_col]));
    }
    if (!dates.empty() && !(dates.back() < d)) {
      throw DataError(fmt::format("{}: row {}: date {} is not after {} (dates must be strictly increasing)", origin,
                                  row_no, format_iso_date(d), format_iso_date(dates.back())));
    }
    dates.push_back(d);
    std::vector<double> values(keep.size(), 0.0);
    std::vector<bool> gaps(keep.size(), false);
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const auto cell = cells[keep[k]];
      if (cell.empty()) {
        gaps[k] = true;
        continue;
      }
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError(fmt::format("{}: row {}, column '{}': cannot parse '{}' as a number", origin, row_no, names[k], cell));
      }
      values[k] = v;
    }
    rows.push_back(std::move(values));
    missing.push_back(std::move(gaps));
  }
  if (rows.empty()) throw DataError(fmt::format("{}: no data rows", origin));

  CsvLoad out;
  for (std::size_t k = 0; k < keep.size(); ++k) {
    std::size_t first = 0;
    while (first < rows.size() && missing[first][k]) ++first;
    if (first == rows.size()) throw DataError(fmt::format("{}: column '{}' has no values", origin, names[k]));
    for (std::size_t t = 0; t < first; ++t) rows[t][k] = rows[first][k];
    out.filled += first;
    for (std::size_t t = first + 1; t < rows.size(); ++t) {
      if (missing[t][k]) {
        rows[t][k] = rows[t - 1][k];
        ++out.filled;
      }
    }
  }
  auto& table = out.table;
  table.timestamps = std::move(dates);
  table.names = std::move(names);
  table.values = Matrix(rows.size(), keep.size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t k = 0; k < keep.size(); ++k) table.values(t, k) = rows[t][k];
  table.frequency = infer_frequency(table.timestamps);
  return out;
}

CsvLoad load_timeseries_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open time-series file '{}'", path.string()));
  return parse_timeseries_csv(in, schema, path.string());
}

void write_timeseries_csv(const std::filesystem::path& path, const TimeSeriesTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << "date";
  for (const auto& n : table.names) out << ',' << n;
  out << '\n';
  for (std::size_t t = 0; t < table.length(); ++t) {
    out << format_iso_date(table.timestamps[t]);
    for (std::size_t j = 0; j < table.names.size(); ++j) out << ',' << fmt::format("{}", table.values(t, j));
    out << '\n';
  }
}

std::vector<Date> monthly_calendar(const Date& first, const Date& last) {
  std::vector<Date> out;
  const int n = months_between(first, last);
  for (int m = 0; m <= n; ++m) out.push_back(add_months(month_start(first), m));
  return out;
}

TimeSeriesTable downsample_monthly(const TimeSeriesTable& table) {
  table.validate();
  if (table.length() == 0) throw DataError("cannot downsample an empty table");
  const auto calendar = monthly_calendar(table.timestamps.front(), table.timestamps.back());
  TimeSeriesTable out;
  out.names = table.names;
  out.timestamps = calendar;
  out.values = Matrix(calendar.size(), table.names.size());
  out.frequency = "monthly";
  std::vector<std::size_t> counts(calendar.size(), 0);
  std::vector<std::vector<double>> sums(calendar.size(), std::vector<double>(table.names.size(), 0.0));
  for (std::size_t t = 0; t < table.length(); ++t) {
    const auto m = static_cast<std::size_t>(months_between(calendar.front(), table.timestamps[t]));
    ++counts[m];
    for (std::size_t j = 0; j < table.names.size(); ++j) sums[m][j] += table.values(t, j);
  }
  for (std::size_t m = 0; m < calendar.size(); ++m) {
    if (counts[m] == 0) {
      throw DataError(fmt::format("no observations in month {} (gap in the series)", format_iso_date(calendar[m]).substr(0, 7)));
    }
    for (std::size_t j = 0; j < table.names.size(); ++j) out.values(m, j) = sums[m][j] / static_cast<double>(counts[m]);
  }
  return out;
}

}  // namespace mat
