#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wxembed/core/tensor.hpp"
#include "wxembed/data/calendar.hpp"
#include "wxembed/data/catalog.hpp"

namespace wxe {

struct GridSpec {
  std::size_t n_lat = 0;
  std::size_t n_lon = 0;
  std::optional<std::size_t> patch_divisible_hint;

  /// Throws UsageError unless both dims are at least 8.
  void validate() const;
  std::size_t cells() const noexcept { return n_lat * n_lon; }
  bool operator==(const GridSpec&) const = default;
};

/// Parses "32x64".
GridSpec parse_grid(const std::string& s);

/// Static binary land-sea mask, 1 = land.
class LandSeaMask {
 public:
  LandSeaMask() = default;
  LandSeaMask(std::size_t n_lat, std::size_t n_lon, std::vector<std::uint8_t> cells);

  std::size_t n_lat() const noexcept { return n_lat_; }
  std::size_t n_lon() const noexcept { return n_lon_; }
  std::span<const std::uint8_t> cells() const noexcept { return cells_; }
  bool land(std::size_t i, std::size_t j) const noexcept { return cells_[i * n_lon_ + j] != 0; }
  std::size_t land_count() const noexcept;

  bool operator==(const LandSeaMask&) const = default;

 private:
  std::size_t n_lat_ = 0;
  std::size_t n_lon_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// A batch of gridded fields [B, C, H, W] with its variable catalog.
struct WeatherState {
  Tensor4<float> data;
  VariableCatalog catalog;
  bool normalized = false;
  std::vector<Hour> timestamps;

  /// Checks C == catalog size, B == timestamps, finiteness, and (raw states only)
  /// diagnostic channels within their data_range.
  void validate() const;
};

struct ChannelStat {
  std::string name;
  double mean = 0.0;
  double sigma = 1.0;
  bool operator==(const ChannelStat&) const = default;
};

/// Per-channel climatological mean and population standard deviation.
class ClimStats {
 public:
  ClimStats() = default;
  /// Throws UsageError if any sigma is not strictly positive and finite.
  explicit ClimStats(std::vector<ChannelStat> channels);

  std::size_t size() const noexcept { return channels_.size(); }
  const std::vector<ChannelStat>& channels() const noexcept { return channels_; }
  const ChannelStat& at(const std::string& name) const;
  const ChannelStat* find(const std::string& name) const noexcept;

  bool operator==(const ClimStats&) const = default;

 private:
  std::vector<ChannelStat> channels_;
};

/// Statistics over all (time, lat, lon) cells of the selected channels of `data`
/// ([T, C, H, W]), restricted to `times` when non-empty. Accumulates in double.
ClimStats compute_clim_stats(const Tensor4<float>& data, const VariableCatalog& catalog,
                             std::span<const std::size_t> channels, std::span<const std::size_t> times = {});

/// (x - mean) / sigma per channel; channels are matched to stats by name.
WeatherState normalize(const WeatherState& state, const ClimStats& stats);
WeatherState denormalize(const WeatherState& state, const ClimStats& stats);

nlohmann::json to_json(const ClimStats& s);
ClimStats clim_stats_from_json(const nlohmann::json& j);
void write_stats_sidecar(const ClimStats& s, const std::string& path);
ClimStats read_stats_sidecar(const std::string& path);

}  // namespace wxe
