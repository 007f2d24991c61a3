#pragma once

#include <memory>
#include <string>
#include <vector>

#include "wxembed/core/tensor.hpp"
#include "wxembed/nn/dft.hpp"
#include "wxembed/nn/param_set.hpp"

namespace wxe {

// Every layer follows the same contract: the constructor registers its tensors
// in a ParamSet and keeps their indices; forward() reads parameters and fills a
// caller-owned cache; backward() consumes that cache, accumulates parameter
// gradients into a ParamSet of identical layout, and returns the input gradient.
// Layers hold no mutable state, so one layer object may serve concurrent callers
// that each own their caches.

/// y = x W + b with W stored [in, out].
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamSet<T>& ps, const std::string& prefix, std::size_t in, std::size_t out);

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }

  Mat<T> forward(const ParamSet<T>& ps, const Mat<T>& x) const;
  /// `x` is the forward input. Returns dL/dx unless `need_input_grad` is false.
  Mat<T> backward(const ParamSet<T>& ps, const Mat<T>& x, const Mat<T>& gy, ParamSet<T>& grads,
                  bool need_input_grad = true) const;

 private:
  std::size_t w_ = 0, b_ = 0, in_ = 0, out_ = 0;
};

/// Per-row normalization over the feature axis with learned scale and offset.
template <typename T>
class LayerNorm {
 public:
  struct Cache {
    Mat<T> xhat;
    Eigen::Matrix<T, Eigen::Dynamic, 1> rstd;
  };

  LayerNorm() = default;
  LayerNorm(ParamSet<T>& ps, const std::string& prefix, std::size_t d, double eps = 1e-5);

  Mat<T> forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const;
  Mat<T> backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads) const;

 private:
  std::size_t gamma_ = 0, beta_ = 0, d_ = 0;
  double eps_ = 1e-5;
};

/// Two-layer channel MLP with exact (erf) GELU between the layers.
template <typename T>
class Mlp {
 public:
  struct Cache {
    Mat<T> x, pre, act;
  };

  Mlp() = default;
  Mlp(ParamSet<T>& ps, const std::string& prefix, std::size_t d, std::size_t hidden);

  Mat<T> forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const;
  Mat<T> backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads) const;

 private:
  Linear<T> fc1_, fc2_;
};

struct SpectralMixerOptions {
  std::size_t n_blocks = 8;
  double shrink_lambda = 0.01;
  double mode_keep_fraction = 1.0;
};

/// Adaptive Fourier token mixer.
///
/// Per sample: 2-D DFT of the [h*w, d] token grid; on each retained frequency a
/// shared two-layer complex MLP with k block-diagonal (d/k x d/k) weights and a
/// ReLU applied separately to real and imaginary parts; soft-shrinkage with
/// threshold lambda on the second layer's real and imaginary parts; discarded
/// frequencies set to zero; real part of the inverse DFT. The residual add is
/// left to the caller.
///
/// Parameters: w1, w2 shaped [2, k, d/k, d/k] (real, imaginary), b1, b2 shaped [2, d].
template <typename T>
class SpectralMixer {
 public:
  struct Cache {
    Mat<T> xr, xi;      // retained input modes, [B*K, d]
    Mat<T> p1r, p1i;    // first-layer pre-activations
    Mat<T> o1r, o1i;    // first-layer outputs
    Mat<T> p2r, p2i;    // second-layer outputs before shrinkage
    std::size_t batch = 0;
  };

  SpectralMixer() = default;
  SpectralMixer(ParamSet<T>& ps, const std::string& prefix, std::size_t d, std::size_t h, std::size_t w,
                const SpectralMixerOptions& opts);

  const std::vector<std::size_t>& modes() const noexcept { return modes_; }
  const Dft2d<T>& dft() const noexcept { return dft_; }

  /// x is [B*h*w, d].
  Mat<T> forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const;
  Mat<T> backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads) const;

 private:
  void gather(const Mat<T>& x, std::size_t batch, Mat<T>& re, Mat<T>& im) const;
  Mat<T> scatter_inverse(const Mat<T>& re, const Mat<T>& im, std::size_t batch) const;

  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
  std::size_t d_ = 0, h_ = 0, w_ = 0, k_ = 0, bs_ = 0;
  T lambda_ = T(0);
  Dft2d<T> dft_;
  std::vector<std::size_t> modes_;
};

/// Pre-norm residual block: x += mix(LN(x)); x += mlp(LN(x)).
template <typename T>
class AfnoBlock {
 public:
  struct Cache {
    typename LayerNorm<T>::Cache ln1, ln2;
    typename SpectralMixer<T>::Cache mix;
    typename Mlp<T>::Cache mlp;
  };

  AfnoBlock() = default;
  AfnoBlock(ParamSet<T>& ps, const std::string& prefix, std::size_t d, std::size_t h, std::size_t w,
            std::size_t mlp_hidden, const SpectralMixerOptions& opts);

  Mat<T> forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const;
  Mat<T> backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads) const;

 private:
  LayerNorm<T> ln1_, ln2_;
  SpectralMixer<T> mix_;
  Mlp<T> mlp_;
};

struct TokenNetSpec {
  std::size_t in_features = 0;
  std::size_t embed_dim = 0;
  std::size_t out_features = 0;
  std::size_t n_layers = 0;
  bool position_embedding = false;
  std::size_t grid_h = 0, grid_w = 0;  // token grid
  std::size_t mlp_hidden = 0;
  SpectralMixerOptions mixer;
};

/// Linear in-projection, optional learned position embedding, a stack of AFNO
/// blocks, linear out-projection. Operates on [B*h*w, features] token matrices.
template <typename T>
class TokenNet {
 public:
  struct Cache {
    Mat<T> input;
    std::vector<Mat<T>> block_in;  // input to each block; back() is the out-projection input
    std::vector<typename AfnoBlock<T>::Cache> blocks;
    std::size_t batch = 0;
  };

  TokenNet() = default;
  TokenNet(ParamSet<T>& ps, const TokenNetSpec& spec);

  const TokenNetSpec& spec() const noexcept { return spec_; }

  Mat<T> forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const;
  Mat<T> backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads,
                  bool need_input_grad = true) const;

 private:
  TokenNetSpec spec_;
  Linear<T> in_proj_, out_proj_;
  std::size_t pos_ = 0;
  std::vector<AfnoBlock<T>> blocks_;
};

template <typename T>
T gelu(T x) noexcept;
template <typename T>
T gelu_grad(T x) noexcept;

extern template class Linear<float>;
extern template class Linear<double>;
extern template class LayerNorm<float>;
extern template class LayerNorm<double>;
extern template class Mlp<float>;
extern template class Mlp<double>;
extern template class SpectralMixer<float>;
extern template class SpectralMixer<double>;
extern template class AfnoBlock<float>;
extern template class AfnoBlock<double>;
extern template class TokenNet<float>;
extern template class TokenNet<double>;

}  // namespace wxe
