#include "wxembed/training/train_config.hpp"

#include <cmath>
#include <set>
#include <string>

#include "wxembed/core/error.hpp"

namespace wxe {

const char* to_string(LossMaskMode m) noexcept {
  switch (m) {
    case LossMaskMode::Catalog:
      return "catalog";
    case LossMaskMode::None:
      return "none";
    case LossMaskMode::LandSea:
      return "land-sea";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw UsageError("lr0 must be positive");
  if (!(decay_gamma > 0.0) || decay_gamma > 1.0) throw UsageError("decay_gamma must lie in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("Adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw UsageError("Adam eps must be positive");
  if (batch_size == 0) throw UsageError("batch_size must be >= 1");
  if (n_epochs == 0) throw UsageError("n_epochs must be >= 1");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.decay_gamma, static_cast<double>(epoch));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"decay_gamma", c.decay_gamma},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"batch_size", c.batch_size},
          {"n_epochs", c.n_epochs},
          {"seed", c.seed},
          {"loss_mask", to_string(c.loss_mask)},
          {"snapshot_every", c.snapshot_every},
          {"cache_latents", c.cache_latents}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"lr0",      "decay_gamma", "beta1",     "beta2",
                                              "eps",      "batch_size",  "n_epochs",  "seed",
                                              "loss_mask", "snapshot_every", "cache_latents"};
  if (!j.is_object()) throw UsageError("train config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw UsageError("unknown train config key '" + k + "'");
  }
  TrainConfig c;
  try {
    auto get = [&](const char* k, auto& dst) {
      if (j.contains(k)) dst = j[k].get<std::decay_t<decltype(dst)>>();
    };
    get("lr0", c.lr0);
    get("decay_gamma", c.decay_gamma);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("batch_size", c.batch_size);
    get("n_epochs", c.n_epochs);
    get("seed", c.seed);
    get("snapshot_every", c.snapshot_every);
    get("cache_latents", c.cache_latents);
    if (j.contains("loss_mask")) {
      const auto m = j["loss_mask"].get<std::string>();
      if (m == "catalog") c.loss_mask = LossMaskMode::Catalog;
      else if (m == "none") c.loss_mask = LossMaskMode::None;
      else if (m == "land-sea") c.loss_mask = LossMaskMode::LandSea;
      else throw UsageError("unknown loss_mask '" + m + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("train config: ") + e.what());
  }
  return c;
}

}  // namespace wxe
