#pragma once

#include <cstdint>

#include "wxembed/nn/param_set.hpp"
#include "wxembed/training/train_config.hpp"

namespace wxe {

/// First and second moments mirroring a ParamSet, plus the step counter.
struct OptimizerState {
  ParamSet<float> m, v;
  std::uint64_t t = 0;

  static OptimizerState fresh(const ParamSet<float>& params);
  bool operator==(const OptimizerState&) const = default;
};

/// One bias-corrected Adam update with learning rate `lr`. All gradients are checked
/// before anything is modified; a non-finite entry throws NumericError naming the tensor.
void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, OptimizerState& state, double lr,
               const TrainConfig& cfg);

}  // namespace wxe
