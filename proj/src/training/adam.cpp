#include "wxembed/training/adam.hpp"

#include <cmath>

#include "wxembed/core/error.hpp"

namespace wxe {

OptimizerState OptimizerState::fresh(const ParamSet<float>& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, OptimizerState& state, double lr,
               const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw UsageError("optimizer state does not mirror the parameter set");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].data.size() != params[i].data.size()) {
      throw UsageError("gradient for '" + params[i].name + "' has the wrong size");
    }
    for (float g : grads[i].data) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in " + params.role() + "/" + params[i].name);
      }
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    const auto& g = grads[i].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      const double vk = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      p[k] = static_cast<float>(p[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + cfg.eps));
    }
  }
}

}  // namespace wxe
