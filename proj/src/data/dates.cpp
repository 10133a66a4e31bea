#include <charconv>

#include <fmt/format.h>

#include "mat/data/types.hpp"
#include "mat/error.hpp"

namespace mat {

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

Date parse_iso_date(std::string_view text) {
  int y = 0, m = 0, d = 1;
  bool ok = false;
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    ok = parse_int(text.substr(0, 4), y) && parse_int(text.substr(5, 2), m) && parse_int(text.substr(8, 2), d);
  } else if (text.size() == 7 && text[4] == '-') {
    ok = parse_int(text.substr(0, 4), y) && parse_int(text.substr(5, 2), m);
  }
  const Date out{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                 std::chrono::day{static_cast<unsigned>(d)}};
  if (!ok || !out.ok()) throw DataError(fmt::format("invalid date '{}' (want YYYY-MM-DD)", text));
  return out;
}

std::string format_iso_date(const Date& d) {
  return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                     static_cast<unsigned>(d.day()));
}

Date month_start(const Date& d) { return d.year() / d.month() / std::chrono::day{1}; }

Date add_months(const Date& d, int months) {
  const auto ym = std::chrono::year_month{d.year(), d.month()} + std::chrono::months{months};
  return ym / std::chrono::day{1};
}

int months_between(const Date& a, const Date& b) {
  return (static_cast<int>(b.year()) - static_cast<int>(a.year())) * 12 +
         (static_cast<int>(static_cast<unsigned>(b.month())) - static_cast<int>(static_cast<unsigned>(a.month())));
}

}  // namespace mat
