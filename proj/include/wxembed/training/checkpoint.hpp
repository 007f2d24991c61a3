#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wxembed/data/state.hpp"
#include "wxembed/nn/model_config.hpp"
#include "wxembed/nn/param_set.hpp"
#include "wxembed/training/adam.hpp"
#include "wxembed/training/train_config.hpp"

namespace wxe {

struct LossRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;  // 1-based optimizer step that produced this loss
  double lr = 0.0;
  double loss = 0.0;
  bool operator==(const LossRecord&) const = default;
};

/// One model's parameters. Frozen groups carry no optimizer state.
struct ParamGroup {
  ParamSet<float> params;
  bool trainable = true;
  OptimizerState opt;
  bool operator==(const ParamGroup&) const = default;
};

/// Everything needed to evaluate a trained model or resume its training exactly.
/// Training resumes at epoch granularity: the shuffle for epoch e is a pure function
/// of (train.seed, e), so (epoch, step) is the whole RNG cursor.
struct TrainingState {
  ModelRole role = ModelRole::Autoencoder;
  ModelConfig model;                         // trained model (the head, for downstream)
  std::optional<ModelConfig> encoder_model;  // downstream: the frozen encoder's config
  TrainConfig train;
  std::optional<std::string> target;         // diagnostic variable name
  bool target_normalized = false;            // target trained in normalized units
  std::optional<ClimStats> stats;            // normalization used for inputs and target
  std::optional<std::uint64_t> dataset_checksum;
  std::vector<ParamGroup> groups;
  std::uint64_t step = 0;
  std::size_t epoch = 0;  // completed epochs
  std::vector<LossRecord> history;

  /// Throws UsageError naming the missing role.
  const ParamGroup& group(const std::string& role) const;
  ParamGroup& group(const std::string& role);
  bool has_group(const std::string& role) const noexcept;

  bool operator==(const TrainingState&) const = default;
};

inline constexpr char kCheckpointMagic[4] = {'W', 'X', 'C', '1'};

/// "WXC1" | u64 manifest_len | canonical JSON manifest | per group: f32 parameter
/// payloads, then (trainable groups) first and second moments | u64 FNV-1a of all
/// preceding bytes. Written to a temporary file and renamed into place.
void save_checkpoint(const TrainingState& state, const std::string& path);

/// Verifies magic, checksum, manifest/payload agreement and per-group fingerprints.
/// Errors are FormatError with kinds BadMagic, ChecksumMismatch, BadHeader or ShapeMismatch.
TrainingState load_checkpoint(const std::string& path);

/// CSV with header "epoch,step,lr,loss".
void write_loss_csv(const std::vector<LossRecord>& history, const std::string& path);
/// Mean loss per epoch, in epoch order.
std::vector<double> epoch_means(const std::vector<LossRecord>& history);

}  // namespace wxe
