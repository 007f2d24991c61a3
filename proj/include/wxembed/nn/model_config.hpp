#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "wxembed/data/state.hpp"
#include "wxembed/nn/layers.hpp"

namespace wxe {

enum class ModelRole { Autoencoder, Downstream, Bespoke };

const char* to_string(ModelRole r) noexcept;
ModelRole parse_model_role(const std::string& s);

/// Architecture hyper-parameters for one model role. Defaults are the full-scale
/// settings (d = 768, p = 8, k = 8 spectral blocks, mlp_ratio = 4).
struct ModelConfig {
  ModelRole role = ModelRole::Autoencoder;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 768;
  std::size_t latent_dim = 768;
  std::size_t n_encoder_layers = 4;  // autoencoder only
  std::size_t n_decoder_layers = 4;  // autoencoder only
  std::size_t n_layers = 6;          // downstream / bespoke
  std::size_t n_blocks = 8;
  double mlp_ratio = 4.0;
  double shrink_lambda = 0.01;
  double mode_keep_fraction = 1.0;
  std::size_t in_channels = 54;
  std::size_t out_channels = 54;
  std::optional<GridSpec> grid;

  /// Full-scale configuration for a role (4+4, 6 or 12 layers).
  static ModelConfig full_scale(ModelRole role);

  /// Checks the invariants; with `require_grid` also the grid binding (H, W divisible by p).
  void validate(bool require_grid = true) const;

  std::size_t token_h() const;
  std::size_t token_w() const;
  std::size_t mlp_hidden() const noexcept;
  SpectralMixerOptions mixer() const noexcept { return {n_blocks, shrink_lambda, mode_keep_fraction}; }

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
/// Rejects unknown keys. Missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace wxe
