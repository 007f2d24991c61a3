#pragma once

#include <cstdint>
#include <fstream>
#include <ostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wxembed/data/state.hpp"

namespace wxe {

/// In-memory WXD1 dataset: [T, C, H, W] payload plus metadata.
///
/// File layout (all integers little-endian):
///   "WXD1" | u64 header_len | header JSON (canonical, sorted keys, no whitespace)
///   | payload f32[T][C][H][W] | mask u8[H][W] if has_mask | u64 FNV-1a of all preceding bytes
struct Dataset {
  GridSpec grid;
  VariableCatalog catalog;
  Hour start{};
  int step_hours = 1;
  std::optional<std::uint64_t> seed;
  std::optional<ClimStats> stats;
  Tensor4<float> data;
  std::optional<LandSeaMask> mask;

  std::size_t n_times() const noexcept { return data.batch(); }
  std::vector<Hour> timestamps() const { return hourly_range(start, n_times(), step_hours); }

  /// Raw (un-normalized) state for the given timesteps and channels.
  WeatherState state(std::span<const std::size_t> times, std::span<const std::size_t> channels) const;

  bool operator==(const Dataset&) const = default;
};

inline constexpr char kDatasetMagic[4] = {'W', 'X', 'D', '1'};

/// Returns the checksum stored in the trailer.
std::uint64_t write_dataset(const Dataset& ds, const std::string& path);
std::uint64_t write_dataset(const Dataset& ds, std::ostream& os);
/// Checksum the file written for `ds` would carry, computed without writing it.
std::uint64_t dataset_checksum(const Dataset& ds);
/// Loads and validates the full file.
Dataset read_dataset(const std::string& path);

/// Streaming reader: validates header, size and checksum on open, then serves
/// single timesteps from disk.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path, bool verify_checksum = true);

  const GridSpec& grid() const noexcept { return header_.grid; }
  const VariableCatalog& catalog() const noexcept { return header_.catalog; }
  std::size_t n_times() const noexcept { return n_times_; }
  std::vector<Hour> timestamps() const { return hourly_range(header_.start, n_times_, header_.step_hours); }
  const std::optional<ClimStats>& stats() const noexcept { return header_.stats; }
  const std::optional<LandSeaMask>& mask() const noexcept { return header_.mask; }
  std::optional<std::uint64_t> seed() const noexcept { return header_.seed; }
  std::uint64_t checksum() const noexcept { return checksum_; }

  /// Raw state for timestep t (B = 1). Throws FormatError(OutOfRange) when t >= n_times.
  WeatherState read_timestep(std::size_t t);

 private:
  Dataset header_;  // metadata only, empty payload
  std::size_t n_times_ = 0;
  std::uint64_t payload_offset_ = 0;
  std::uint64_t checksum_ = 0;
  std::ifstream in_;
};

/// Checksum recorded in the trailer of a WXD1 file.
std::uint64_t dataset_checksum(const std::string& path);

}  // namespace wxe
