#include "wxembed/data/state.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "wxembed/core/error.hpp"

namespace wxe {

void GridSpec::validate() const {
  if (n_lat < 8) throw UsageError("grid n_lat must be >= 8, got " + std::to_string(n_lat));
  if (n_lon < 8) throw UsageError("grid n_lon must be >= 8, got " + std::to_string(n_lon));
}

GridSpec parse_grid(const std::string& s) {
  unsigned long h = 0, w = 0;
  char x = 0;
  int used = 0;
  if (std::sscanf(s.c_str(), "%lu%c%lu%n", &h, &x, &w, &used) != 3 || (x != 'x' && x != 'X') ||
      static_cast<std::size_t>(used) != s.size()) {
    throw UsageError("grid must look like 32x64, got '" + s + "'");
  }
  GridSpec g{h, w, std::nullopt};
  g.validate();
  return g;
}

LandSeaMask::LandSeaMask(std::size_t n_lat, std::size_t n_lon, std::vector<std::uint8_t> cells)
    : n_lat_(n_lat), n_lon_(n_lon), cells_(std::move(cells)) {
  if (cells_.size() != n_lat * n_lon) throw UsageError("mask size does not match grid");
  for (auto v : cells_) {
    if (v > 1) throw UsageError("mask values must be 0 or 1");
  }
}

std::size_t LandSeaMask::land_count() const noexcept {
  std::size_t n = 0;
  for (auto v : cells_) n += v;
  return n;
}

void WeatherState::validate() const {
  if (data.channels() != catalog.size()) {
    throw UsageError("state has " + std::to_string(data.channels()) + " channels but catalog has " +
                     std::to_string(catalog.size()));
  }
  if (data.batch() != timestamps.size()) throw UsageError("timestamp count does not match batch size");
  for (std::size_t b = 0; b < data.batch(); ++b) {
    for (std::size_t c = 0; c < data.channels(); ++c) {
      const auto& e = catalog[c];
      const bool check_range = !normalized && e.role == Role::Diagnostic && e.data_range;
      for (float v : data.plane(b, c)) {
        if (!std::isfinite(v)) throw NumericError("non-finite value in channel '" + e.name + "'");
        if (check_range && (v < e.data_range->lo || v > e.data_range->hi)) {
          throw UsageError("channel '" + e.name + "' outside its data_range");
        }
      }
    }
  }
}

ClimStats::ClimStats(std::vector<ChannelStat> channels) : channels_(std::move(channels)) {
  for (const auto& c : channels_) {
    if (!(c.sigma > 0.0) || !std::isfinite(c.sigma) || !std::isfinite(c.mean)) {
      throw UsageError("channel '" + c.name + "' has zero or invalid variance");
    }
  }
}

const ChannelStat* ClimStats::find(const std::string& name) const noexcept {
  for (const auto& c : channels_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const ChannelStat& ClimStats::at(const std::string& name) const {
  if (const auto* c = find(name)) return *c;
  throw UsageError("no statistics for channel '" + name + "'");
}

ClimStats compute_clim_stats(const Tensor4<float>& data, const VariableCatalog& catalog,
                             std::span<const std::size_t> channels, std::span<const std::size_t> times) {
  std::vector<std::size_t> all_times;
  if (times.empty()) {
    all_times.resize(data.batch());
    for (std::size_t t = 0; t < all_times.size(); ++t) all_times[t] = t;
    times = all_times;
  }
  if (times.size() < 2) throw UsageError("climatological statistics need at least 2 timesteps");
  std::vector<ChannelStat> out;
  for (std::size_t c : channels) {
    if (c >= data.channels()) throw UsageError("channel index out of range");
    const std::string& name = catalog[c].name;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t : times) {
      for (float v : data.plane(t, c)) sum += v;
      n += data.plane();
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t t : times) {
      for (float v : data.plane(t, c)) {
        const double d = static_cast<double>(v) - mean;
        ss += d * d;
      }
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    if (!(sigma > 0.0)) throw UsageError("channel '" + name + "' has zero variance");
    out.push_back({name, mean, sigma});
  }
  return ClimStats(std::move(out));
}

namespace {

WeatherState apply_affine(const WeatherState& state, const ClimStats& stats, bool forward) {
  if (state.normalized == forward) {
    throw UsageError(forward ? "state is already normalized" : "state is not normalized");
  }
  WeatherState out = state;
  out.normalized = forward;
  for (std::size_t c = 0; c < state.catalog.size(); ++c) {
    const auto* s = stats.find(state.catalog[c].name);
    if (!s) throw UsageError("no statistics for channel '" + state.catalog[c].name + "'");
    for (std::size_t b = 0; b < state.data.batch(); ++b) {
      auto src = state.data.plane(b, c);
      auto dst = out.data.plane(b, c);
      for (std::size_t k = 0; k < src.size(); ++k) {
        const double v = src[k];
        dst[k] = static_cast<float>(forward ? (v - s->mean) / s->sigma : v * s->sigma + s->mean);
      }
    }
  }
  return out;
}

}  // namespace

WeatherState normalize(const WeatherState& state, const ClimStats& stats) {
  return apply_affine(state, stats, true);
}

WeatherState denormalize(const WeatherState& state, const ClimStats& stats) {
  return apply_affine(state, stats, false);
}

nlohmann::json to_json(const ClimStats& s) {
  auto arr = nlohmann::json::array();
  for (const auto& c : s.channels()) arr.push_back({{"name", c.name}, {"mean", c.mean}, {"sigma", c.sigma}});
  return nlohmann::json{{"channels", arr}};
}

ClimStats clim_stats_from_json(const nlohmann::json& j) {
  std::vector<ChannelStat> out;
  for (const auto& c : j.at("channels")) {
    out.push_back({c.at("name").get<std::string>(), c.at("mean").get<double>(), c.at("sigma").get<double>()});
  }
  return ClimStats(std::move(out));
}

void write_stats_sidecar(const ClimStats& s, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << to_json(s).dump(2) << "\n";
}

ClimStats read_stats_sidecar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return clim_stats_from_json(nlohmann::json::parse(is));
}

}  // namespace wxe
