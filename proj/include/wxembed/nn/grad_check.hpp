#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wxembed/nn/model_config.hpp"
#include "wxembed/nn/param_set.hpp"

namespace wxe {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;  // "<role>/<tensor>[<index>]"
  double analytic = 0.0;    // at the worst element
  double numeric = 0.0;
  std::size_t n_checked = 0;
};

/// A scalar loss over one or more parameter sets plus its analytic gradient.
struct GradProblem {
  std::vector<ParamSet<double>*> params;
  std::function<double()> loss;
  /// Receives zeroed buffers laid out like `params` and accumulates dL/dparams into them.
  std::function<void(std::vector<ParamSet<double>>& grads)> gradient;
};

/// Compares the analytic gradient (scaled by `corrupt`, 1 = unmodified) against
/// central differences with step `h` on every parameter element. The relative error
/// is |a - n| / max(|a|, |n|, 1e-5); the floor absorbs roundoff on gradients that
/// are exactly zero (e.g. imaginary spectral biases, which the real projection discards).
GradCheckReport run_grad_check(const GradProblem& problem, double h = 1e-5, double corrupt = 1.0);

enum class GradTarget { Linear, LayerNorm, Mlp, SpectralMixer, AfnoBlock, Encoder, Decoder, Autoencoder, Downstream, Bespoke };

const char* to_string(GradTarget t) noexcept;

/// Grad check of one component under a random linear loss sum(r * output), in
/// double precision. `cfg` should be tiny (a few thousand parameters at most).
GradCheckReport grad_check(GradTarget target, const ModelConfig& cfg, std::uint64_t seed, double corrupt = 1.0);

/// Small config used for grad checks: 12x16 grid, p = 4, d = 8, two spectral blocks.
ModelConfig grad_check_config();

}  // namespace wxe
