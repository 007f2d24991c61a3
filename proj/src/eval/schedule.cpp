#include "wxembed/eval/schedule.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "wxembed/core/error.hpp"

namespace wxe {

EvalSchedule build_schedule(std::span<const Hour> timestamps, std::optional<int> year) {
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1]) throw UsageError("dataset timestamps are not strictly increasing");
  }
  EvalSchedule s;
  std::set<std::pair<int, unsigned>> months;
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const auto c = civil(timestamps[i]);
    if (year && c.year != *year) continue;
    months.emplace(c.year, c.month);
    if (std::find(kEvalDays.begin(), kEvalDays.end(), c.day) == kEvalDays.end()) continue;
    s.timestamps.push_back(timestamps[i]);
    s.indices.push_back(i);
  }
  if (s.indices.empty()) {
    throw UsageError("no dataset timestamp falls on an evaluation day (1, 2, 15, 16)" +
                     (year ? " in " + std::to_string(*year) : std::string()));
  }
  const std::size_t expected = months.size() * kEvalDays.size() * 24;
  s.missing = expected > s.size() ? expected - s.size() : 0;
  return s;
}

}  // namespace wxe
