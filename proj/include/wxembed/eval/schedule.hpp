#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "wxembed/data/calendar.hpp"

namespace wxe {

inline constexpr std::array<unsigned, 4> kEvalDays = {1, 2, 15, 16};

/// Evaluation timestamps and their dataset indices, strictly increasing.
struct EvalSchedule {
  std::vector<Hour> timestamps;
  std::vector<std::size_t> indices;
  /// Hours on evaluation days of the covered months that the dataset lacks.
  std::size_t missing = 0;

  std::size_t size() const noexcept { return indices.size(); }
};

/// Every hour on days 1, 2, 15 and 16 of each month, optionally restricted to `year`.
/// A month counts as covered when the dataset has any timestamp in it; evaluation hours
/// absent from covered months are tallied in `missing`. Throws UsageError when
/// timestamps are not strictly increasing or nothing matches.
EvalSchedule build_schedule(std::span<const Hour> timestamps, std::optional<int> year = std::nullopt);

}  // namespace wxe
