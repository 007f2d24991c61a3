#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wxembed/data/dataset.hpp"
#include "wxembed/eval/metrics.hpp"
#include "wxembed/eval/report.hpp"
#include "wxembed/eval/schedule.hpp"
#include "wxembed/training/checkpoint.hpp"

namespace wxe {

/// A trained diagnostic model (downstream or bespoke) under a report tag.
struct EvalModel {
  std::string tag;
  TrainingState state;
};

struct EvalOptions {
  SsimOptions ssim;
  bool lat_weighted = false;
  std::optional<std::uint64_t> dataset_checksum;  // recorded in metadata and compared with the checkpoints
};

/// Predictions of a diagnostic checkpoint for normalized inputs [N, C_prognostic, H, W],
/// returned in physical units as [N, 1, H, W]. `entry` is the target's catalog row and
/// selects the output activation. Samples run one at a time.
Tensor4<float> predict_diagnostic(const TrainingState& state, const VariableEntry& entry,
                                  const Tensor4<float>& inputs);

/// Scores every model at every scheduled timestamp against the dataset's truth channel.
/// Variables whose catalog entry carries a land-sea mask are scored over land only;
/// SSIM uses the entry's data range span as L. Records are ordered by timestamp, then
/// by model in the order given. Throws UsageError on a missing truth channel, a
/// checkpoint without a target or stats, or a grid mismatch.
MetricReport evaluate(std::span<const EvalModel> models, const Dataset& ds, const EvalSchedule& schedule,
                      const EvalOptions& opts = {});

/// Scores an autoencoder's reconstruction of the named prognostic variables in physical
/// units at every scheduled timestamp, under `tag`. Prognostic variables carry no catalog
/// range, so SSIM uses the span of the variable's truth over the scheduled steps as L.
MetricReport evaluate_reconstruction(const TrainingState& autoencoder, const std::string& tag, const Dataset& ds,
                                     const EvalSchedule& schedule, std::span<const std::string> variables,
                                     const EvalOptions& opts = {});

/// Published full-scale aggregates for the two diagnostics, kept as report annotations.
nlohmann::json full_scale_reference();

}  // namespace wxe
