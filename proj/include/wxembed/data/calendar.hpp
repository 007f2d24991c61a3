#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace wxe {

/// Hour-resolution UTC instant.
using Hour = std::chrono::sys_time<std::chrono::hours>;

/// "YYYY-MM-DDTHH:00Z"
std::string format_hour(Hour h);
/// Accepts "YYYY-MM-DDTHH", "YYYY-MM-DDTHH:MM", optional trailing 'Z'; minutes must be 00.
Hour parse_hour(const std::string& s);

Hour make_hour(int year, unsigned month, unsigned day, int hour);

std::vector<Hour> hourly_range(Hour start, std::size_t n, int step_hours = 1);

struct CivilTime {
  int year;
  unsigned month;
  unsigned day;
  int hour;
};
CivilTime civil(Hour h);

}  // namespace wxe
