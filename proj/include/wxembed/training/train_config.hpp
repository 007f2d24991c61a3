#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

namespace wxe {

/// Which cells enter a training loss. `Catalog` follows the target's catalog entry
/// (land-only for stl1, everywhere otherwise).
enum class LossMaskMode { Catalog, None, LandSea };

const char* to_string(LossMaskMode m) noexcept;

struct TrainConfig {
  double lr0 = 2e-4;
  double decay_gamma = 0.98;  // per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_size = 4;
  std::size_t n_epochs = 10;
  std::uint64_t seed = 42;
  LossMaskMode loss_mask = LossMaskMode::Catalog;
  std::size_t snapshot_every = 0;  // epochs; 0 = final checkpoint only
  bool cache_latents = false;      // downstream only

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// lr0 * decay_gamma^epoch.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

nlohmann::json to_json(const TrainConfig& c);
/// Rejects unknown keys. Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace wxe
