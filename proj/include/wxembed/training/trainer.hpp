#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wxembed/data/dataset.hpp"
#include "wxembed/nn/models.hpp"
#include "wxembed/training/checkpoint.hpp"
#include "wxembed/training/train_config.hpp"

namespace wxe {

/// Normalized model inputs (all prognostic channels) and, optionally, one diagnostic
/// target for a subset of dataset timesteps. Targets with an output activation stay in
/// physical units (the activation's range is their range); other targets are normalized.
struct SampleSet {
  Tensor4<float> inputs;   // [N, C_prognostic, H, W]
  Tensor4<float> targets;  // [N, 1, H, W], empty without a target
  std::optional<LandSeaMask> loss_mask;
  std::optional<VariableEntry> target;
  bool target_normalized = false;
  std::vector<std::size_t> times;  // dataset timestep of each sample
  std::vector<Hour> timestamps;
  ClimStats stats;
  std::optional<std::uint64_t> dataset_checksum;

  std::size_t size() const noexcept { return inputs.batch(); }
  /// Inputs (and targets) of the listed samples, stacked in order.
  Tensor4<float> input_batch(std::span<const std::size_t> idx) const;
  Tensor4<float> target_batch(std::span<const std::size_t> idx) const;
};

/// Mean and sigma over `times` for every catalog channel (prognostic and diagnostic).
ClimStats training_stats(const Dataset& ds, std::span<const std::size_t> times);

/// `target` names a diagnostic variable or is empty (autoencoder samples).
SampleSet make_samples(const Dataset& ds, std::span<const std::size_t> times, const ClimStats& stats,
                       const std::optional<std::string>& target, LossMaskMode mask_mode = LossMaskMode::Catalog);

/// Per-epoch callback and an early stop used for snapshots and resume tests.
struct TrainHooks {
  std::function<void(const TrainingState&)> on_epoch;
  std::optional<std::size_t> stop_after_epoch;  // return once this many epochs are complete
};

/// Raised when a loss or gradient turns non-finite. Carries the state from before the
/// failing step, which is unmodified because updates happen only after all checks pass.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, TrainingState last_good)
      : NumericError(what), last_good_(std::make_shared<const TrainingState>(std::move(last_good))) {}
  const TrainingState& last_good() const noexcept { return *last_good_; }

 private:
  std::shared_ptr<const TrainingState> last_good_;
};

/// Joint encoder + decoder training on reconstruction MSE over the prognostic inputs.
/// With `resume`, continues from its epoch with its parameters and optimizer state.
TrainingState train_autoencoder(const SampleSet& data, const ModelConfig& cfg, const TrainConfig& train,
                                const TrainHooks& hooks = {}, const TrainingState* resume = nullptr);

/// Head training on latents of a frozen encoder taken from an autoencoder checkpoint.
/// The result holds the encoder (frozen, byte-identical to the input) and the head.
/// Throws FreezeViolation if the encoder fingerprint changes.
TrainingState train_downstream(const SampleSet& data, const TrainingState& encoder_ckpt, const ModelConfig& head,
                               const TrainConfig& train, const TrainHooks& hooks = {},
                               const TrainingState* resume = nullptr);

/// End-to-end training of a model from raw (normalized) inputs to one diagnostic.
TrainingState train_bespoke(const SampleSet& data, const ModelConfig& cfg, const TrainConfig& train,
                            const TrainHooks& hooks = {}, const TrainingState* resume = nullptr);

/// Latents of every sample, encoded one sample at a time so each latent is bit-identical
/// regardless of how samples are later batched.
Tensor4<float> encode_samples(const PatchModel<float>& encoder, const ParamSet<float>& params,
                              const Tensor4<float>& inputs);

/// Throws FreezeViolation unless `params` still has fingerprint `expected`.
void verify_frozen(const ParamSet<float>& params, std::uint64_t expected);

}  // namespace wxe
