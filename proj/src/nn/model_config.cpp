#include "wxembed/nn/model_config.hpp"

#include <cmath>
#include <set>

#include "wxembed/core/error.hpp"

namespace wxe {

const char* to_string(ModelRole r) noexcept {
  switch (r) {
    case ModelRole::Autoencoder:
      return "autoencoder";
    case ModelRole::Downstream:
      return "downstream";
    case ModelRole::Bespoke:
      return "bespoke";
  }
  return "?";
}

ModelRole parse_model_role(const std::string& s) {
  if (s == "autoencoder") return ModelRole::Autoencoder;
  if (s == "downstream") return ModelRole::Downstream;
  if (s == "bespoke") return ModelRole::Bespoke;
  throw UsageError("unknown model role '" + s + "'");
}

ModelConfig ModelConfig::full_scale(ModelRole role) {
  ModelConfig c;
  c.role = role;
  c.grid = GridSpec{720, 1440, 8};
  switch (role) {
    case ModelRole::Autoencoder:
      c.out_channels = c.in_channels;
      break;
    case ModelRole::Downstream:
      c.n_layers = 6;
      c.out_channels = 1;
      break;
    case ModelRole::Bespoke:
      c.n_layers = 12;
      c.out_channels = 1;
      break;
  }
  return c;
}

void ModelConfig::validate(bool require_grid) const {
  if (patch_size == 0) throw UsageError("patch_size must be positive");
  if (embed_dim == 0 || latent_dim == 0) throw UsageError("embed_dim and latent_dim must be positive");
  if (n_blocks == 0 || embed_dim % n_blocks != 0) {
    throw UsageError("embed_dim " + std::to_string(embed_dim) + " is not divisible by n_blocks " +
                     std::to_string(n_blocks));
  }
  if (!(mlp_ratio > 0.0)) throw UsageError("mlp_ratio must be positive");
  if (!(shrink_lambda >= 0.0)) throw UsageError("shrink_lambda must be >= 0");
  if (!(mode_keep_fraction > 0.0) || mode_keep_fraction > 1.0) {
    throw UsageError("mode_keep_fraction must lie in (0, 1]");
  }
  if (in_channels == 0 || out_channels == 0) throw UsageError("channel counts must be positive");
  if (role == ModelRole::Autoencoder && in_channels != out_channels) {
    throw UsageError("autoencoder must reconstruct its input channels");
  }
  if (!require_grid) return;
  if (!grid) throw UsageError("model config is not bound to a grid");
  if (grid->n_lat % patch_size != 0) {
    throw UsageError("grid n_lat " + std::to_string(grid->n_lat) + " is not divisible by patch_size " +
                     std::to_string(patch_size));
  }
  if (grid->n_lon % patch_size != 0) {
    throw UsageError("grid n_lon " + std::to_string(grid->n_lon) + " is not divisible by patch_size " +
                     std::to_string(patch_size));
  }
}

std::size_t ModelConfig::token_h() const {
  if (!grid) throw UsageError("model config is not bound to a grid");
  return grid->n_lat / patch_size;
}

std::size_t ModelConfig::token_w() const {
  if (!grid) throw UsageError("model config is not bound to a grid");
  return grid->n_lon / patch_size;
}

std::size_t ModelConfig::mlp_hidden() const noexcept {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j{{"role", to_string(c.role)},
                   {"patch_size", c.patch_size},
                   {"embed_dim", c.embed_dim},
                   {"latent_dim", c.latent_dim},
                   {"n_encoder_layers", c.n_encoder_layers},
                   {"n_decoder_layers", c.n_decoder_layers},
                   {"n_layers", c.n_layers},
                   {"n_blocks", c.n_blocks},
                   {"mlp_ratio", c.mlp_ratio},
                   {"shrink_lambda", c.shrink_lambda},
                   {"mode_keep_fraction", c.mode_keep_fraction},
                   {"in_channels", c.in_channels},
                   {"out_channels", c.out_channels}};
  if (c.grid) j["grid"] = {c.grid->n_lat, c.grid->n_lon};
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "role",         "patch_size",  "embed_dim",          "latent_dim",  "n_encoder_layers",
      "n_decoder_layers", "n_layers", "n_blocks",          "mlp_ratio",   "shrink_lambda",
      "mode_keep_fraction", "in_channels", "out_channels", "grid"};
  if (!j.is_object()) throw UsageError("model config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw UsageError("unknown model config key '" + k + "'");
  }
  ModelConfig c;
  try {
    if (j.contains("role")) c.role = parse_model_role(j["role"].get<std::string>());
    auto get = [&](const char* k, auto& dst) {
      if (j.contains(k)) dst = j[k].get<std::decay_t<decltype(dst)>>();
    };
    get("patch_size", c.patch_size);
    get("embed_dim", c.embed_dim);
    get("latent_dim", c.latent_dim);
    get("n_encoder_layers", c.n_encoder_layers);
    get("n_decoder_layers", c.n_decoder_layers);
    get("n_layers", c.n_layers);
    get("n_blocks", c.n_blocks);
    get("mlp_ratio", c.mlp_ratio);
    get("shrink_lambda", c.shrink_lambda);
    get("mode_keep_fraction", c.mode_keep_fraction);
    get("in_channels", c.in_channels);
    get("out_channels", c.out_channels);
    if (j.contains("grid")) c.grid = GridSpec{j["grid"].at(0).get<std::size_t>(), j["grid"].at(1).get<std::size_t>(), {}};
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("model config: ") + e.what());
  }
  return c;
}

}  // namespace wxe
