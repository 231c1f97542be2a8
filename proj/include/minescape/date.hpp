#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace minescape {

using Date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DD" (also accepts the TIFF "YYYY:MM:DD" form). Returns
/// nullopt for malformed or non-existent calendar dates.
std::optional<Date> parse_date(std::string_view text);

/// Like parse_date but throws Error(BadRequest).
Date parse_date_or_throw(std::string_view text);

std::string format_date(const Date& d);

/// Calendar month arithmetic; the day is clamped to the last day of the
/// resulting month (2024-03-31 minus 1 month is 2024-02-29).
Date add_months(const Date& d, int months);

/// UTC timestamp "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

}  // namespace minescape
