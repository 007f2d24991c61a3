#pragma once

#include <cstdint>
#include <string>

#include "wxembed/core/tensor.hpp"
#include "wxembed/data/catalog.hpp"
#include "wxembed/nn/layers.hpp"
#include "wxembed/nn/model_config.hpp"
#include "wxembed/nn/param_set.hpp"

namespace wxe {

/// [B, C, H, W] -> token rows (b, i, j) with features (c, u, v), i.e. [B*(H/p)*(W/p), C*p*p].
/// Throws UsageError naming the dimension that p does not divide.
template <typename T>
Mat<T> patchify(const Tensor4<T>& x, std::size_t p);

/// Inverse of patchify.
template <typename T>
Tensor4<T> depatchify(const Mat<T>& tokens, std::size_t batch, std::size_t channels, std::size_t height,
                      std::size_t width, std::size_t p);

/// Token rows (b, i, j) x features -> [B, features, h, w] and back.
template <typename T>
Tensor4<T> tokens_to_grid(const Mat<T>& tokens, std::size_t batch, std::size_t h, std::size_t w);
template <typename T>
Mat<T> grid_to_tokens(const Tensor4<T>& x);

/// What a model consumes or produces: a physical field [B, C, H, W] (patched by p)
/// or a latent grid [B, L, H/p, W/p] (one token per cell).
enum class Port { Field, Latent };

/// A TokenNet wrapped with the port conversions and an optional output activation.
/// The parameter layout is fixed at construction; any ParamSet passed in must share it.
template <typename T>
class PatchModel {
 public:
  struct Cache {
    typename TokenNet<T>::Cache net;
    Tensor4<T> output;  // post-activation
  };

  PatchModel(std::string role, Port in, Port out, std::size_t in_channels, std::size_t out_channels,
             Activation activation, std::size_t n_layers, bool position_embedding, const ModelConfig& cfg);

  const ParamSet<T>& layout() const noexcept { return layout_; }
  /// Fresh parameters drawn from `seed`.
  ParamSet<T> init_params(std::uint64_t seed) const;
  /// Throws UsageError unless `ps` has exactly this model's role, names and shapes.
  void check_layout(const ParamSet<T>& ps) const;

  Tensor4<T> forward(const ParamSet<T>& ps, const Tensor4<T>& x, Cache& c) const;
  Tensor4<T> forward(const ParamSet<T>& ps, const Tensor4<T>& x) const;
  /// `gy` is dL/d(output after activation). Accumulates into `grads`; returns dL/dx if requested.
  Tensor4<T> backward(const ParamSet<T>& ps, const Cache& c, const Tensor4<T>& gy, ParamSet<T>& grads,
                      bool need_input_grad = true) const;

  Port input_port() const noexcept { return in_; }
  Port output_port() const noexcept { return out_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t out_channels() const noexcept { return out_channels_; }

 private:
  Mat<T> to_tokens(const Tensor4<T>& x) const;
  Tensor4<T> from_tokens(const Mat<T>& tok, std::size_t batch, Port port, std::size_t channels) const;
  void check_input(const Tensor4<T>& x) const;

  Port in_, out_;
  std::size_t in_channels_, out_channels_;
  Activation activation_;
  std::size_t p_, grid_h_, grid_w_;
  ParamSet<T> layout_;
  TokenNet<T> net_;
};

/// Field [B, C, H, W] -> latent [B, L, H/p, W/p]; learned position embedding.
template <typename T>
PatchModel<T> make_encoder(const ModelConfig& cfg);
/// Latent -> field [B, C, H, W]; no position embedding.
template <typename T>
PatchModel<T> make_decoder(const ModelConfig& cfg);
/// Latent -> one diagnostic field [B, 1, H, W] with the target's activation.
template <typename T>
PatchModel<T> make_downstream(const ModelConfig& cfg, const VariableEntry& target);
/// Field -> one diagnostic field, trained end-to-end on raw inputs.
template <typename T>
PatchModel<T> make_bespoke(const ModelConfig& cfg, const VariableEntry& target);

/// Trainable element count for a config, from the architecture alone (no allocation).
/// For the autoencoder this is encoder plus decoder. Requires a bound grid.
std::size_t count_params(const ModelConfig& cfg);
/// Encoder and decoder counts separately.
std::size_t count_encoder_params(const ModelConfig& cfg);
std::size_t count_decoder_params(const ModelConfig& cfg);

extern template class PatchModel<float>;
extern template class PatchModel<double>;

}  // namespace wxe
