#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wxembed/cli/run_config.hpp"
#include "wxembed/data/dataset.hpp"
#include "wxembed/eval/evaluate.hpp"
#include "wxembed/training/trainer.hpp"

namespace wxe {

/// Progress lines go here (stderr by default); null silences them.
void set_log_stream(std::ostream* os) noexcept;
void log_line(const std::string& msg);

/// The dataset with its split: the evaluation schedule is the test set, every other
/// timestep trains, and normalization statistics come from the training steps only.
struct PreparedData {
  Dataset ds;
  std::uint64_t checksum = 0;
  EvalSchedule test;
  std::vector<std::size_t> train;
  ClimStats stats;
};

Dataset synth_from_config(const DataSection& d);
PreparedData prepare_data(const RunConfig& cfg);
/// Timesteps in [0, n_times) that the schedule does not select.
std::vector<std::size_t> train_split(std::size_t n_times, const EvalSchedule& test);

/// Content-addressed output directory "<runs>/<command>-<hash>" holding config.json,
/// write-once outputs and, once the command succeeds, manifest.json listing every
/// output with its size and FNV-1a checksum.
class RunDir {
 public:
  /// Throws Error if the directory holds an unfinished run and `resume` is false.
  /// `inputs` names external inputs (checkpoint checksums, targets) and joins the hash.
  RunDir(const RunConfig& cfg, const std::string& command, bool resume = false, const std::string& inputs = "");

  const std::filesystem::path& path() const noexcept { return dir_; }
  std::uint64_t hash() const noexcept { return hash_; }
  /// True when a previous invocation already finished (manifest present).
  bool complete() const;
  /// Path for a new output; throws Error if it already exists.
  std::string output(const std::string& name) const;
  /// Outputs already on disk whose names start with `prefix`, sorted.
  std::vector<std::string> existing(const std::string& prefix) const;
  /// Writes manifest.json over every file in the directory; `extra` is merged into it.
  void finalize(const nlohmann::json& extra = nlohmann::json::object());

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::uint64_t hash_ = 0;
};

/// Training with the run directory's bookkeeping: resumes from the newest
/// "<name>.e<epoch>.wxc" snapshot when asked, snapshots every `snapshot_every` epochs,
/// saves "<name>.last_good.wxc" before rethrowing TrainingDiverged, and writes
/// "<name>.wxc" plus "<name>.loss.csv" at the end.
using TrainFn = std::function<TrainingState(const TrainHooks&, const TrainingState* resume)>;
TrainingState run_training(RunDir& dir, const std::string& name, const TrainConfig& train, bool resume,
                           const TrainFn& fn);

TrainingState train_ae_stage(const RunConfig& cfg, const PreparedData& data, RunDir& dir, bool resume);
TrainingState train_downstream_stage(const RunConfig& cfg, const PreparedData& data, const TrainingState& encoder,
                                     const std::string& target, RunDir& dir, bool resume);
TrainingState train_bespoke_stage(const RunConfig& cfg, const PreparedData& data, const std::string& target,
                                  RunDir& dir, bool resume);

EvalOptions eval_options(const RunConfig& cfg, std::uint64_t dataset_checksum);

/// Parameter totals of the three configured roles.
struct ParamAudit {
  std::size_t encoder = 0;
  std::size_t decoder = 0;
  std::size_t autoencoder = 0;
  std::size_t downstream = 0;
  std::size_t bespoke = 0;
  double downstream_over_bespoke() const noexcept { return double(downstream) / double(bespoke); }
  nlohmann::json to_json() const;
};
ParamAudit audit_params(const ModelSection& m);

/// One configuration of the patch x layers grid, with per-variable aggregates.
struct AblationRow {
  std::size_t patch = 0;
  std::size_t layers = 0;
  std::vector<AggregateRecord> metrics;  // in eval.ablation_variables order
};
inline constexpr std::pair<std::size_t, std::size_t> kAblationGrid[4] = {{4, 8}, {4, 4}, {8, 8}, {8, 4}};
/// Trains one autoencoder per grid cell (layers on each side) from model.autoencoder
/// and train.autoencoder, then scores reconstructions on the test split.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const PreparedData& data, RunDir& dir, bool resume);
/// "patch,layers" then, per variable, "<v>_rmse_mean,<v>_rmse_sigma,<v>_ssim_mean,<v>_ssim_sigma".
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::vector<std::string>& variables,
                        const std::string& path);

struct ParityRow {
  std::string variable;
  double rmse_downstream = 0.0;
  double rmse_bespoke = 0.0;
  double ratio = 0.0;
  bool pass = false;
};
struct ParityResult {
  MetricReport report;
  std::vector<ParityRow> rows;
  ParamAudit params;
  double bound = 1.15;
  bool params_ok = false;
  bool pass = false;
  nlohmann::json to_json() const;
};
/// Autoencoder, one downstream head and one bespoke model per eval variable, evaluation
/// of both on the test split, and the parity and parameter checks.
ParityResult run_bench_parity(const RunConfig& cfg, const PreparedData& data, RunDir& dir, bool resume);

/// Fixed-width text table of aggregates for terminal output.
std::string format_aggregates(const std::vector<AggregateRecord>& aggs);

}  // namespace wxe
