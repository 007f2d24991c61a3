#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wxembed/data/calendar.hpp"
#include "wxembed/data/state.hpp"
#include "wxembed/eval/metrics.hpp"
#include "wxembed/nn/model_config.hpp"
#include "wxembed/training/train_config.hpp"

namespace wxe {

/// Where the data comes from: an existing WXD1 file, or the synthetic generator.
struct DataSection {
  std::optional<std::string> path;
  std::uint64_t seed = 42;
  GridSpec grid{32, 64, {}};
  std::size_t n_times = 608;
  Hour start = make_hour(2019, 12, 24, 0);
  int step_hours = 1;
  std::size_t modes_per_channel = 16;
  bool operator==(const DataSection&) const = default;
};

/// One config per model role. A role's grid defaults to the data grid.
struct ModelSection {
  ModelConfig autoencoder = ModelConfig::full_scale(ModelRole::Autoencoder);
  ModelConfig downstream = ModelConfig::full_scale(ModelRole::Downstream);
  ModelConfig bespoke = ModelConfig::full_scale(ModelRole::Bespoke);
  bool operator==(const ModelSection&) const = default;
};

struct TrainSection {
  TrainConfig autoencoder;
  TrainConfig downstream;
  TrainConfig bespoke;
  bool operator==(const TrainSection&) const = default;
};

struct EvalSection {
  std::vector<std::string> variables{"tcc", "stl1"};
  SsimOptions ssim;
  bool lat_weighted = false;
  std::optional<int> year;      // restrict the schedule (and so the test split) to one year
  double parity_ratio = 1.15;   // bench-parity bound on downstream / bespoke test RMSE
  std::vector<std::string> ablation_variables{"u10", "t2m"};
  bool operator==(const EvalSection&) const = default;
};

struct PathsSection {
  std::string runs = "runs";
  bool operator==(const PathsSection&) const = default;
};

/// Complete description of a run. Parsing fills defaults and rejects unknown keys, so
/// the canonical dump of a parsed config fully determines the run.
struct RunConfig {
  DataSection data;
  ModelSection model;
  TrainSection train;
  EvalSection eval;
  PathsSection paths;

  /// Throws UsageError naming the offending field.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults. Model grids absent from the JSON follow data.grid.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Reads and parses a config file; UsageError on unreadable or malformed input.
RunConfig load_run_config(const std::string& path);

/// FNV-1a of the canonical (sorted-key, compact) dump, salted with the command name.
std::uint64_t config_hash(const RunConfig& c, const std::string& command);

}  // namespace wxe
