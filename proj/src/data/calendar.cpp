#include "wxembed/data/calendar.hpp"

#include <cstdio>

#include "wxembed/core/error.hpp"

namespace wxe {

using namespace std::chrono;

Hour make_hour(int year, unsigned month, unsigned day, int hour) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw UsageError("invalid calendar date");
  if (hour < 0 || hour > 23) throw UsageError("hour out of range");
  return Hour{sys_days{ymd}} + hours{hour};
}

CivilTime civil(Hour h) {
  const auto d = floor<days>(h);
  const year_month_day ymd{d};
  return {int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()), int((h - d).count())};
}

std::string format_hour(Hour h) {
  const auto c = civil(h);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00Z", c.year, c.month, c.day, c.hour);
  return buf;
}

Hour parse_hour(const std::string& s) {
  int y = 0, hr = 0, mi = 0;
  unsigned mo = 0, d = 0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%uT%d%n", &y, &mo, &d, &hr, &consumed) != 4) {
    throw UsageError("bad timestamp '" + s + "'");
  }
  std::string rest = s.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest.front() == ':') {
    int used = 0;
    if (std::sscanf(rest.c_str(), ":%d%n", &mi, &used) != 1) throw UsageError("bad timestamp '" + s + "'");
    rest = rest.substr(static_cast<std::size_t>(used));
  }
  if (rest == "Z") rest.clear();
  if (!rest.empty() || mi != 0) throw UsageError("bad timestamp '" + s + "'");
  return make_hour(y, mo, d, hr);
}

std::vector<Hour> hourly_range(Hour start, std::size_t n, int step_hours) {
  std::vector<Hour> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(start + hours{static_cast<long>(i) * step_hours});
  return out;
}

}  // namespace wxe
