#include "opcast/date.hpp"

#include <charconv>
#include <cstdio>

#include "opcast/error.hpp"

namespace opcast {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
  return ec == std::errc{};
}

}  // namespace

Date parse_date(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !read_int(text, 0, 4, y) ||
      !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
    throw Error(Errc::BadDate, std::string(text), "expected YYYY-MM-DD");
  }
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(Errc::BadDate, std::string(text), "not a calendar date");
  return Date{ymd};
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

TimePoint parse_timestamp(std::string_view text) {
  if (text.size() == 10) return to_timepoint(parse_date(text));
  int hh = 0, mm = 0, ss = 0;
  if (text.size() != 20 || text[10] != 'T' || text[13] != ':' || text[16] != ':' || text[19] != 'Z' ||
      !read_int(text, 11, 2, hh) || !read_int(text, 14, 2, mm) || !read_int(text, 17, 2, ss) || hh > 23 ||
      mm > 59 || ss > 59) {
    throw Error(Errc::BadDate, std::string(text), "expected YYYY-MM-DDTHH:MM:SSZ");
  }
  return to_timepoint(parse_date(text.substr(0, 10))) + std::chrono::hours{hh} + std::chrono::minutes{mm} +
         std::chrono::seconds{ss};
}

std::string format_timestamp(TimePoint t) {
  const Date day = floor_day(t);
  if (TimePoint{day} == t) return format_date(day);
  std::chrono::hh_mm_ss hms{t - TimePoint{day}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
  return format_date(day) + buf;
}

Date preceding_year(Date d) {
  using namespace std::chrono;
  year_month_day ymd{d};
  year_month_day prev = ymd - years{1};
  if (!prev.ok()) prev = year_month_day{year_month_day_last{prev.year(), month_day_last{prev.month()}}};
  return Date{prev};
}

std::vector<Date> trailing_days(Date last, int count) {
  std::vector<Date> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = count - 1; k >= 0; --k) out.push_back(last - std::chrono::days{k});
  return out;
}

}  // namespace opcast
