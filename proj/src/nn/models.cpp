#include "wxembed/nn/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wxembed/core/error.hpp"

namespace wxe {

template <typename T>
Mat<T> patchify(const Tensor4<T>& x, std::size_t p) {
  if (p == 0) throw UsageError("patch size must be positive");
  if (x.height() % p != 0) {
    throw UsageError("height " + std::to_string(x.height()) + " is not divisible by patch size " +
                     std::to_string(p));
  }
  if (x.width() % p != 0) {
    throw UsageError("width " + std::to_string(x.width()) + " is not divisible by patch size " +
                     std::to_string(p));
  }
  const std::size_t B = x.batch(), C = x.channels(), h = x.height() / p, w = x.width() / p;
  Mat<T> out(long(B * h * w), long(C * p * p));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        T* row = out.data() + ((b * h + i) * w + j) * C * p * p;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t u = 0; u < p; ++u)
            for (std::size_t v = 0; v < p; ++v) *row++ = x(b, c, i * p + u, j * p + v);
      }
  return out;
}

template <typename T>
Tensor4<T> depatchify(const Mat<T>& tokens, std::size_t batch, std::size_t channels, std::size_t height,
                      std::size_t width, std::size_t p) {
  if (p == 0 || height % p != 0 || width % p != 0) throw UsageError("grid is not divisible by patch size");
  const std::size_t h = height / p, w = width / p;
  if (std::size_t(tokens.rows()) != batch * h * w || std::size_t(tokens.cols()) != channels * p * p) {
    throw UsageError("token matrix shape does not match the requested field");
  }
  Tensor4<T> out(batch, channels, height, width);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const T* row = tokens.data() + ((b * h + i) * w + j) * channels * p * p;
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t u = 0; u < p; ++u)
            for (std::size_t v = 0; v < p; ++v) out(b, c, i * p + u, j * p + v) = *row++;
      }
  return out;
}

template <typename T>
Tensor4<T> tokens_to_grid(const Mat<T>& tokens, std::size_t batch, std::size_t h, std::size_t w) {
  if (std::size_t(tokens.rows()) != batch * h * w) throw UsageError("token count does not match the grid");
  const std::size_t F = std::size_t(tokens.cols());
  Tensor4<T> out(batch, F, h, w);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const T* row = tokens.data() + ((b * h + i) * w + j) * F;
        for (std::size_t f = 0; f < F; ++f) out(b, f, i, j) = row[f];
      }
  return out;
}

template <typename T>
Mat<T> grid_to_tokens(const Tensor4<T>& x) {
  const std::size_t B = x.batch(), F = x.channels(), h = x.height(), w = x.width();
  Mat<T> out(long(B * h * w), long(F));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        T* row = out.data() + ((b * h + i) * w + j) * F;
        for (std::size_t f = 0; f < F; ++f) row[f] = x(b, f, i, j);
      }
  return out;
}

template <typename T>
PatchModel<T>::PatchModel(std::string role, Port in, Port out, std::size_t in_channels, std::size_t out_channels,
                          Activation activation, std::size_t n_layers, bool position_embedding,
                          const ModelConfig& cfg)
    : in_(in),
      out_(out),
      in_channels_(in_channels),
      out_channels_(out_channels),
      activation_(activation),
      p_(cfg.patch_size),
      layout_(std::move(role)) {
  cfg.validate();
  grid_h_ = cfg.token_h();
  grid_w_ = cfg.token_w();
  const std::size_t pp = p_ * p_;
  TokenNetSpec spec;
  spec.in_features = in == Port::Field ? in_channels * pp : in_channels;
  spec.out_features = out == Port::Field ? out_channels * pp : out_channels;
  spec.embed_dim = cfg.embed_dim;
  spec.n_layers = n_layers;
  spec.position_embedding = position_embedding;
  spec.grid_h = grid_h_;
  spec.grid_w = grid_w_;
  spec.mlp_hidden = cfg.mlp_hidden();
  spec.mixer = cfg.mixer();
  net_ = TokenNet<T>(layout_, spec);
}

template <typename T>
ParamSet<T> PatchModel<T>::init_params(std::uint64_t seed) const {
  ParamSet<T> ps = layout_;
  ps.initialize(seed);
  return ps;
}

template <typename T>
void PatchModel<T>::check_layout(const ParamSet<T>& ps) const {
  if (ps.role() != layout_.role()) {
    throw UsageError("parameter set role '" + ps.role() + "' does not match model role '" + layout_.role() + "'");
  }
  if (ps.size() != layout_.size()) throw UsageError("parameter set has the wrong number of tensors");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].name != layout_[i].name || ps[i].shape != layout_[i].shape) {
      throw UsageError("parameter tensor '" + ps[i].name + "' does not match the model layout");
    }
  }
}

template <typename T>
void PatchModel<T>::check_input(const Tensor4<T>& x) const {
  const std::size_t h = in_ == Port::Field ? grid_h_ * p_ : grid_h_;
  const std::size_t w = in_ == Port::Field ? grid_w_ * p_ : grid_w_;
  if (x.batch() == 0 || x.channels() != in_channels_ || x.height() != h || x.width() != w) {
    throw UsageError("model input " + shape_string(x.shape()) + " does not match expected (B," +
                     std::to_string(in_channels_) + "," + std::to_string(h) + "," + std::to_string(w) + ")");
  }
}

template <typename T>
Mat<T> PatchModel<T>::to_tokens(const Tensor4<T>& x) const {
  return in_ == Port::Field ? patchify(x, p_) : grid_to_tokens(x);
}

template <typename T>
Tensor4<T> PatchModel<T>::from_tokens(const Mat<T>& tok, std::size_t batch, Port port, std::size_t channels) const {
  if (port == Port::Field) return depatchify(tok, batch, channels, grid_h_ * p_, grid_w_ * p_, p_);
  return tokens_to_grid(tok, batch, grid_h_, grid_w_);
}

template <typename T>
Tensor4<T> PatchModel<T>::forward(const ParamSet<T>& ps, const Tensor4<T>& x, Cache& c) const {
  check_layout(ps);
  check_input(x);
  Mat<T> y = net_.forward(ps, to_tokens(x), c.net);
  if (activation_ == Activation::Sigmoid) {
    // Kept strictly inside (0, 1) even where the logistic rounds to an endpoint.
    constexpr T lo = std::numeric_limits<T>::min(), hi = T(1) - std::numeric_limits<T>::epsilon() / 2;
    y = y.unaryExpr([lo, hi](T v) { return std::clamp(T(1) / (T(1) + std::exp(-v)), lo, hi); });
  }
  c.output = from_tokens(y, x.batch(), out_, out_channels_);
  return c.output;
}

template <typename T>
Tensor4<T> PatchModel<T>::forward(const ParamSet<T>& ps, const Tensor4<T>& x) const {
  Cache c;
  return forward(ps, x, c);
}

template <typename T>
Tensor4<T> PatchModel<T>::backward(const ParamSet<T>& ps, const Cache& c, const Tensor4<T>& gy, ParamSet<T>& grads,
                                   bool need_input_grad) const {
  check_layout(ps);
  check_layout(grads);
  if (gy.shape() != c.output.shape()) throw UsageError("output gradient shape does not match the forward output");
  Tensor4<T> g = gy;
  if (activation_ == Activation::Sigmoid) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      const T s = c.output.data()[k];
      g.data()[k] *= s * (T(1) - s);
    }
  }
  const Mat<T> gt = out_ == Port::Field ? patchify(g, p_) : grid_to_tokens(g);
  Mat<T> gx = net_.backward(ps, c.net, gt, grads, need_input_grad);
  if (!need_input_grad) return {};
  return from_tokens(gx, gy.batch(), in_, in_channels_);
}

template <typename T>
PatchModel<T> make_encoder(const ModelConfig& cfg) {
  return PatchModel<T>("encoder", Port::Field, Port::Latent, cfg.in_channels, cfg.latent_dim, Activation::None,
                       cfg.n_encoder_layers, true, cfg);
}

template <typename T>
PatchModel<T> make_decoder(const ModelConfig& cfg) {
  return PatchModel<T>("decoder", Port::Latent, Port::Field, cfg.latent_dim, cfg.out_channels, Activation::None,
                       cfg.n_decoder_layers, false, cfg);
}

template <typename T>
PatchModel<T> make_downstream(const ModelConfig& cfg, const VariableEntry& target) {
  return PatchModel<T>("downstream", Port::Latent, Port::Field, cfg.latent_dim, 1, target.activation,
                       cfg.n_layers, false, cfg);
}

template <typename T>
PatchModel<T> make_bespoke(const ModelConfig& cfg, const VariableEntry& target) {
  return PatchModel<T>("bespoke", Port::Field, Port::Field, cfg.in_channels, 1, target.activation, cfg.n_layers,
                       true, cfg);
}

namespace {

std::size_t linear_count(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t token_net_count(const ModelConfig& cfg, std::size_t in_features, std::size_t out_features,
                            std::size_t n_layers, bool pos) {
  const std::size_t d = cfg.embed_dim, hidden = cfg.mlp_hidden(), bs = d / cfg.n_blocks;
  const std::size_t norms = 2 * 2 * d;
  const std::size_t mixer = 2 * (2 * cfg.n_blocks * bs * bs) + 2 * (2 * d);
  const std::size_t mlp = linear_count(d, hidden) + linear_count(hidden, d);
  std::size_t n = linear_count(in_features, d) + n_layers * (norms + mixer + mlp) + linear_count(d, out_features);
  if (pos) n += cfg.token_h() * cfg.token_w() * d;
  return n;
}

}  // namespace

std::size_t count_encoder_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t pp = cfg.patch_size * cfg.patch_size;
  return token_net_count(cfg, cfg.in_channels * pp, cfg.latent_dim, cfg.n_encoder_layers, true);
}

std::size_t count_decoder_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t pp = cfg.patch_size * cfg.patch_size;
  return token_net_count(cfg, cfg.latent_dim, cfg.out_channels * pp, cfg.n_decoder_layers, false);
}

std::size_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t pp = cfg.patch_size * cfg.patch_size;
  switch (cfg.role) {
    case ModelRole::Autoencoder:
      return count_encoder_params(cfg) + count_decoder_params(cfg);
    case ModelRole::Downstream:
      return token_net_count(cfg, cfg.latent_dim, cfg.out_channels * pp, cfg.n_layers, false);
    case ModelRole::Bespoke:
      return token_net_count(cfg, cfg.in_channels * pp, cfg.out_channels * pp, cfg.n_layers, true);
  }
  return 0;
}

#define WXE_INSTANTIATE(T)                                                                                 \
  template Mat<T> patchify<T>(const Tensor4<T>&, std::size_t);                                             \
  template Tensor4<T> depatchify<T>(const Mat<T>&, std::size_t, std::size_t, std::size_t, std::size_t,     \
                                    std::size_t);                                                          \
  template Tensor4<T> tokens_to_grid<T>(const Mat<T>&, std::size_t, std::size_t, std::size_t);             \
  template Mat<T> grid_to_tokens<T>(const Tensor4<T>&);                                                    \
  template PatchModel<T> make_encoder<T>(const ModelConfig&);                                              \
  template PatchModel<T> make_decoder<T>(const ModelConfig&);                                              \
  template PatchModel<T> make_downstream<T>(const ModelConfig&, const VariableEntry&);                     \
  template PatchModel<T> make_bespoke<T>(const ModelConfig&, const VariableEntry&);                        \
  template class PatchModel<T>;

WXE_INSTANTIATE(float)
WXE_INSTANTIATE(double)

}  // namespace wxe
