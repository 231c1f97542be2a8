#include "minescape/date.hpp"

#include <cstdio>
#include <ctime>

#include "minescape/error.hpp"

namespace minescape {

using namespace std::chrono;

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() < 10) return std::nullopt;
  int y = 0, m = 0, d = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    const char ch = text[i];
    if (i == 4 || i == 7) {
      if (ch != '-' && ch != ':') return std::nullopt;
      continue;
    }
    if (ch < '0' || ch > '9') return std::nullopt;
    const int digit = ch - '0';
    if (i < 4) y = y * 10 + digit;
    else if (i < 7) m = m * 10 + digit;
    else d = d * 10 + digit;
  }
  // Allow a trailing time component ("YYYY:MM:DD HH:MM:SS" or ISO "T...").
  if (text.size() > 10 && text[10] != ' ' && text[10] != 'T') return std::nullopt;
  const Date date{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

Date parse_date_or_throw(std::string_view text) {
  auto d = parse_date(text);
  if (!d) throw Error(ErrorCode::BadRequest, "invalid date '" + std::string(text) + "'");
  return *d;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

Date add_months(const Date& d, int months) {
  year_month ym = year_month{d.year(), d.month()} + std::chrono::months{months};
  const auto last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
  const day dd = d.day() > last ? last : d.day();
  return Date{ym.year(), ym.month(), dd};
}

std::string utc_timestamp() {
  const std::time_t now = system_clock::to_time_t(system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace minescape
