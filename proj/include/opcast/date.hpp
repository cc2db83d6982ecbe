#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace opcast {

using Date = std::chrono::sys_days;
using TimePoint = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DD`; throws Error(BadDate).
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Accepts `YYYY-MM-DD` or `YYYY-MM-DDTHH:MM:SSZ`.
TimePoint parse_timestamp(std::string_view text);
/// Midnight timestamps are written date-only, everything else in full UTC form.
std::string format_timestamp(TimePoint t);

inline TimePoint to_timepoint(Date d) { return TimePoint{d}; }
inline Date floor_day(TimePoint t) { return std::chrono::floor<std::chrono::days>(t); }
inline bool is_midnight(TimePoint t) { return TimePoint{floor_day(t)} == t; }

/// Same calendar day one year earlier; Feb 29 clamps to Feb 28.
Date preceding_year(Date d);

/// `count` consecutive days ending at (and including) `last`.
std::vector<Date> trailing_days(Date last, int count);

}  // namespace opcast
