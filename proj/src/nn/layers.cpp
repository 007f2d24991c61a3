#include "wxembed/nn/layers.hpp"

#include <cmath>
#include <numbers>

#include "wxembed/core/error.hpp"

namespace wxe {

namespace {

template <typename T>
using CMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MMap = Eigen::Map<Mat<T>>;
template <typename T>
using CRow = Eigen::Map<const RowVec<T>>;
template <typename T>
using MRow = Eigen::Map<RowVec<T>>;

}  // namespace

template <typename T>
T gelu(T x) noexcept {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) noexcept {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(ParamSet<T>& ps, const std::string& prefix, std::size_t in, std::size_t out)
    : in_(in), out_(out) {
  w_ = ps.add(prefix + ".weight", {in, out}, Init::TruncNormal);
  b_ = ps.add(prefix + ".bias", {out}, Init::Zeros);
}

template <typename T>
Mat<T> Linear<T>::forward(const ParamSet<T>& ps, const Mat<T>& x) const {
  if (std::size_t(x.cols()) != in_) throw UsageError("linear input width mismatch");
  CMap<T> W(ps.data(w_), long(in_), long(out_));
  Mat<T> y(x.rows(), long(out_));
  y.noalias() = x * W;
  y.rowwise() += CRow<T>(ps.data(b_), long(out_));
  return y;
}

template <typename T>
Mat<T> Linear<T>::backward(const ParamSet<T>& ps, const Mat<T>& x, const Mat<T>& gy, ParamSet<T>& grads,
                           bool need_input_grad) const {
  MMap<T> gW(grads.data(w_), long(in_), long(out_));
  gW.noalias() += x.transpose() * gy;
  MRow<T>(grads.data(b_), long(out_)) += gy.colwise().sum();
  if (!need_input_grad) return {};
  CMap<T> W(ps.data(w_), long(in_), long(out_));
  Mat<T> gx(gy.rows(), long(in_));
  gx.noalias() = gy * W.transpose();
  return gx;
}

// ---------------------------------------------------------------------------
// LayerNorm

template <typename T>
LayerNorm<T>::LayerNorm(ParamSet<T>& ps, const std::string& prefix, std::size_t d, double eps)
    : d_(d), eps_(eps) {
  gamma_ = ps.add(prefix + ".gamma", {d}, Init::Ones);
  beta_ = ps.add(prefix + ".beta", {d}, Init::Zeros);
}

template <typename T>
Mat<T> LayerNorm<T>::forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const {
  const long n = x.rows(), d = long(d_);
  c.xhat.resize(n, d);
  c.rstd.resize(n);
  for (long r = 0; r < n; ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    const T rstd = T(1) / std::sqrt(var + T(eps_));
    c.rstd(r) = rstd;
    c.xhat.row(r) = (x.row(r).array() - mean) * rstd;
  }
  Mat<T> y = c.xhat;
  y.array().rowwise() *= CRow<T>(ps.data(gamma_), d).array();
  y.rowwise() += CRow<T>(ps.data(beta_), d);
  return y;
}

template <typename T>
Mat<T> LayerNorm<T>::backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads) const {
  const long d = long(d_);
  MRow<T>(grads.data(gamma_), d) += (gy.array() * c.xhat.array()).colwise().sum().matrix();
  MRow<T>(grads.data(beta_), d) += gy.colwise().sum();
  Mat<T> gxhat = gy;
  gxhat.array().rowwise() *= CRow<T>(ps.data(gamma_), d).array();
  Mat<T> gx(gy.rows(), d);
  for (long r = 0; r < gy.rows(); ++r) {
    const T m1 = gxhat.row(r).mean();
    const T m2 = (gxhat.row(r).array() * c.xhat.row(r).array()).mean();
    gx.row(r) = c.rstd(r) * (gxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Mlp

template <typename T>
Mlp<T>::Mlp(ParamSet<T>& ps, const std::string& prefix, std::size_t d, std::size_t hidden)
    : fc1_(ps, prefix + ".fc1", d, hidden), fc2_(ps, prefix + ".fc2", hidden, d) {}

template <typename T>
Mat<T> Mlp<T>::forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const {
  c.x = x;
  c.pre = fc1_.forward(ps, x);
  c.act = c.pre.unaryExpr([](T v) { return gelu(v); });
  return fc2_.forward(ps, c.act);
}

template <typename T>
Mat<T> Mlp<T>::backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads) const {
  Mat<T> gact = fc2_.backward(ps, c.act, gy, grads);
  gact.array() *= c.pre.unaryExpr([](T v) { return gelu_grad(v); }).array();
  return fc1_.backward(ps, c.x, gact, grads);
}

// ---------------------------------------------------------------------------
// SpectralMixer

template <typename T>
SpectralMixer<T>::SpectralMixer(ParamSet<T>& ps, const std::string& prefix, std::size_t d, std::size_t h,
                                std::size_t w, const SpectralMixerOptions& opts)
    : d_(d), h_(h), w_(w), k_(opts.n_blocks), lambda_(static_cast<T>(opts.shrink_lambda)), dft_(h, w),
      modes_(kept_modes(h, w, opts.mode_keep_fraction)) {
  if (k_ == 0 || d % k_ != 0) {
    throw UsageError("embed_dim " + std::to_string(d) + " not divisible by n_blocks " + std::to_string(k_));
  }
  if (opts.shrink_lambda < 0.0) throw UsageError("shrink_lambda must be >= 0");
  if (h < 2 || w < 2) {
    throw UsageError("token grid " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than 2x2");
  }
  bs_ = d / k_;
  w1_ = ps.add(prefix + ".w1", {2, k_, bs_, bs_}, Init::TruncNormal);
  b1_ = ps.add(prefix + ".b1", {2, d}, Init::Zeros);
  w2_ = ps.add(prefix + ".w2", {2, k_, bs_, bs_}, Init::TruncNormal);
  b2_ = ps.add(prefix + ".b2", {2, d}, Init::Zeros);
}

template <typename T>
void SpectralMixer<T>::gather(const Mat<T>& x, std::size_t batch, Mat<T>& re, Mat<T>& im) const {
  const long hw = long(h_ * w_), K = long(modes_.size()), d = long(d_);
  re.resize(long(batch) * K, d);
  im.resize(long(batch) * K, d);
  Mat<T> fr(hw, d), fi(hw, d);
  for (std::size_t b = 0; b < batch; ++b) {
    dft_.forward(x.data() + long(b) * hw * d, nullptr, d_, fr.data(), fi.data());
    for (long m = 0; m < K; ++m) {
      re.row(long(b) * K + m) = fr.row(long(modes_[std::size_t(m)]));
      im.row(long(b) * K + m) = fi.row(long(modes_[std::size_t(m)]));
    }
  }
}

template <typename T>
Mat<T> SpectralMixer<T>::scatter_inverse(const Mat<T>& re, const Mat<T>& im, std::size_t batch) const {
  const long hw = long(h_ * w_), K = long(modes_.size()), d = long(d_);
  Mat<T> y(long(batch) * hw, d);
  Mat<T> fr(hw, d), fi(hw, d);
  for (std::size_t b = 0; b < batch; ++b) {
    fr.setZero();
    fi.setZero();
    for (long m = 0; m < K; ++m) {
      fr.row(long(modes_[std::size_t(m)])) = re.row(long(b) * K + m);
      fi.row(long(modes_[std::size_t(m)])) = im.row(long(b) * K + m);
    }
    dft_.inverse_real(fr.data(), fi.data(), d_, y.data() + long(b) * hw * d);
  }
  return y;
}

template <typename T>
Mat<T> SpectralMixer<T>::forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const {
  const std::size_t hw = h_ * w_;
  if (std::size_t(x.cols()) != d_ || std::size_t(x.rows()) % hw != 0) throw UsageError("mixer input shape mismatch");
  if (!x.allFinite()) throw NumericError("non-finite input to spectral mixer");
  const std::size_t batch = std::size_t(x.rows()) / hw;
  c.batch = batch;

  gather(x, batch, c.xr, c.xi);

  const long rows = c.xr.rows(), bs = long(bs_), d = long(d_);
  c.p1r.resize(rows, d);
  c.p1i.resize(rows, d);
  c.p2r.resize(rows, d);
  c.p2i.resize(rows, d);
  const T* w1 = ps.data(w1_);
  const T* w2 = ps.data(w2_);
  const T* b1 = ps.data(b1_);
  const T* b2 = ps.data(b2_);
  for (long blk = 0; blk < long(k_); ++blk) {
    const long c0 = blk * bs;
    CMap<T> W1r(w1 + blk * bs * bs, bs, bs), W1i(w1 + (long(k_) + blk) * bs * bs, bs, bs);
    auto xr = c.xr.middleCols(c0, bs);
    auto xi = c.xi.middleCols(c0, bs);
    auto p1r = c.p1r.middleCols(c0, bs);
    auto p1i = c.p1i.middleCols(c0, bs);
    p1r.noalias() = xr * W1r;
    p1r.noalias() -= xi * W1i;
    p1r.rowwise() += CRow<T>(b1 + c0, bs);
    p1i.noalias() = xi * W1r;
    p1i.noalias() += xr * W1i;
    p1i.rowwise() += CRow<T>(b1 + d + c0, bs);
  }
  c.o1r = c.p1r.cwiseMax(T(0));
  c.o1i = c.p1i.cwiseMax(T(0));
  for (long blk = 0; blk < long(k_); ++blk) {
    const long c0 = blk * bs;
    CMap<T> W2r(w2 + blk * bs * bs, bs, bs), W2i(w2 + (long(k_) + blk) * bs * bs, bs, bs);
    auto o1r = c.o1r.middleCols(c0, bs);
    auto o1i = c.o1i.middleCols(c0, bs);
    auto p2r = c.p2r.middleCols(c0, bs);
    auto p2i = c.p2i.middleCols(c0, bs);
    p2r.noalias() = o1r * W2r;
    p2r.noalias() -= o1i * W2i;
    p2r.rowwise() += CRow<T>(b2 + c0, bs);
    p2i.noalias() = o1i * W2r;
    p2i.noalias() += o1r * W2i;
    p2i.rowwise() += CRow<T>(b2 + d + c0, bs);
  }
  const T lam = lambda_;
  auto shrink = [lam](T v) { return v > lam ? v - lam : (v < -lam ? v + lam : T(0)); };
  const Mat<T> zr = c.p2r.unaryExpr(shrink);
  const Mat<T> zi = c.p2i.unaryExpr(shrink);
  return scatter_inverse(zr, zi, batch);
}

template <typename T>
Mat<T> SpectralMixer<T>::backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy,
                                  ParamSet<T>& grads) const {
  const long d = long(d_), bs = long(bs_);
  const std::size_t batch = c.batch;
  // y = Re(F^H Z)  =>  dL/dZ = F gy.
  Mat<T> gzr, gzi;
  gather(gy, batch, gzr, gzi);
  const T lam = lambda_;
  Mat<T> gp2r = (c.p2r.array().abs() > lam).select(gzr, T(0));
  Mat<T> gp2i = (c.p2i.array().abs() > lam).select(gzi, T(0));

  const T* w1 = ps.data(w1_);
  const T* w2 = ps.data(w2_);
  T* gw1 = grads.data(w1_);
  T* gw2 = grads.data(w2_);
  MRow<T>(grads.data(b2_), d) += gp2r.colwise().sum();
  MRow<T>(grads.data(b2_) + d, d) += gp2i.colwise().sum();

  Mat<T> go1r(gp2r.rows(), d), go1i(gp2r.rows(), d);
  for (long blk = 0; blk < long(k_); ++blk) {
    const long c0 = blk * bs;
    CMap<T> W2r(w2 + blk * bs * bs, bs, bs), W2i(w2 + (long(k_) + blk) * bs * bs, bs, bs);
    MMap<T> gW2r(gw2 + blk * bs * bs, bs, bs), gW2i(gw2 + (long(k_) + blk) * bs * bs, bs, bs);
    auto o1r = c.o1r.middleCols(c0, bs);
    auto o1i = c.o1i.middleCols(c0, bs);
    auto gr = gp2r.middleCols(c0, bs);
    auto gi = gp2i.middleCols(c0, bs);
    gW2r.noalias() += o1r.transpose() * gr;
    gW2r.noalias() += o1i.transpose() * gi;
    gW2i.noalias() += o1r.transpose() * gi;
    gW2i.noalias() -= o1i.transpose() * gr;
    go1r.middleCols(c0, bs).noalias() = gr * W2r.transpose();
    go1r.middleCols(c0, bs).noalias() += gi * W2i.transpose();
    go1i.middleCols(c0, bs).noalias() = gi * W2r.transpose();
    go1i.middleCols(c0, bs).noalias() -= gr * W2i.transpose();
  }
  const Mat<T> gp1r = (c.p1r.array() > T(0)).select(go1r, T(0));
  const Mat<T> gp1i = (c.p1i.array() > T(0)).select(go1i, T(0));
  MRow<T>(grads.data(b1_), d) += gp1r.colwise().sum();
  MRow<T>(grads.data(b1_) + d, d) += gp1i.colwise().sum();

  Mat<T> gxr(gp1r.rows(), d), gxi(gp1r.rows(), d);
  for (long blk = 0; blk < long(k_); ++blk) {
    const long c0 = blk * bs;
    CMap<T> W1r(w1 + blk * bs * bs, bs, bs), W1i(w1 + (long(k_) + blk) * bs * bs, bs, bs);
    MMap<T> gW1r(gw1 + blk * bs * bs, bs, bs), gW1i(gw1 + (long(k_) + blk) * bs * bs, bs, bs);
    auto xr = c.xr.middleCols(c0, bs);
    auto xi = c.xi.middleCols(c0, bs);
    auto gr = gp1r.middleCols(c0, bs);
    auto gi = gp1i.middleCols(c0, bs);
    gW1r.noalias() += xr.transpose() * gr;
    gW1r.noalias() += xi.transpose() * gi;
    gW1i.noalias() += xr.transpose() * gi;
    gW1i.noalias() -= xi.transpose() * gr;
    gxr.middleCols(c0, bs).noalias() = gr * W1r.transpose();
    gxr.middleCols(c0, bs).noalias() += gi * W1i.transpose();
    gxi.middleCols(c0, bs).noalias() = gi * W1r.transpose();
    gxi.middleCols(c0, bs).noalias() -= gr * W1i.transpose();
  }
  // X = F x with x real  =>  dL/dx = Re(F^H dL/dX).
  return scatter_inverse(gxr, gxi, batch);
}

// ---------------------------------------------------------------------------
// AfnoBlock

template <typename T>
AfnoBlock<T>::AfnoBlock(ParamSet<T>& ps, const std::string& prefix, std::size_t d, std::size_t h, std::size_t w,
                        std::size_t mlp_hidden, const SpectralMixerOptions& opts)
    : ln1_(ps, prefix + ".norm1", d),
      ln2_(ps, prefix + ".norm2", d),
      mix_(ps, prefix + ".mixer", d, h, w, opts),
      mlp_(ps, prefix + ".mlp", d, mlp_hidden) {}

template <typename T>
Mat<T> AfnoBlock<T>::forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const {
  Mat<T> x1 = x + mix_.forward(ps, ln1_.forward(ps, x, c.ln1), c.mix);
  Mat<T> y = x1 + mlp_.forward(ps, ln2_.forward(ps, x1, c.ln2), c.mlp);
  return y;
}

template <typename T>
Mat<T> AfnoBlock<T>::backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads) const {
  Mat<T> g1 = gy + ln2_.backward(ps, c.ln2, mlp_.backward(ps, c.mlp, gy, grads), grads);
  return g1 + ln1_.backward(ps, c.ln1, mix_.backward(ps, c.mix, g1, grads), grads);
}

// ---------------------------------------------------------------------------
// TokenNet

template <typename T>
TokenNet<T>::TokenNet(ParamSet<T>& ps, const TokenNetSpec& spec) : spec_(spec) {
  in_proj_ = Linear<T>(ps, "in_proj", spec.in_features, spec.embed_dim);
  if (spec.position_embedding) {
    pos_ = ps.add("pos_embed", {spec.grid_h * spec.grid_w, spec.embed_dim}, Init::TruncNormal);
  }
  for (std::size_t i = 0; i < spec.n_layers; ++i) {
    blocks_.emplace_back(ps, "blocks." + std::to_string(i), spec.embed_dim, spec.grid_h, spec.grid_w,
                         spec.mlp_hidden, spec.mixer);
  }
  out_proj_ = Linear<T>(ps, "out_proj", spec.embed_dim, spec.out_features);
}

template <typename T>
Mat<T> TokenNet<T>::forward(const ParamSet<T>& ps, const Mat<T>& x, Cache& c) const {
  const long hw = long(spec_.grid_h * spec_.grid_w), d = long(spec_.embed_dim);
  if (x.rows() % hw != 0) throw UsageError("token count is not a multiple of the token grid");
  c.batch = std::size_t(x.rows() / hw);
  c.input = x;
  Mat<T> h = in_proj_.forward(ps, x);
  if (spec_.position_embedding) {
    CMap<T> pos(ps.data(pos_), hw, d);
    for (std::size_t b = 0; b < c.batch; ++b) h.middleRows(long(b) * hw, hw) += pos;
  }
  c.block_in.assign(blocks_.size() + 1, Mat<T>());
  c.blocks.resize(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    c.block_in[i] = h;
    h = blocks_[i].forward(ps, c.block_in[i], c.blocks[i]);
  }
  c.block_in.back() = h;
  return out_proj_.forward(ps, h);
}

template <typename T>
Mat<T> TokenNet<T>::backward(const ParamSet<T>& ps, const Cache& c, const Mat<T>& gy, ParamSet<T>& grads,
                             bool need_input_grad) const {
  const long hw = long(spec_.grid_h * spec_.grid_w), d = long(spec_.embed_dim);
  Mat<T> g = out_proj_.backward(ps, c.block_in.back(), gy, grads);
  for (std::size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(ps, c.blocks[i], g, grads);
  if (spec_.position_embedding) {
    MMap<T> gpos(grads.data(pos_), hw, d);
    for (std::size_t b = 0; b < c.batch; ++b) gpos += g.middleRows(long(b) * hw, hw);
  }
  return in_proj_.backward(ps, c.input, g, grads, need_input_grad);
}

template float gelu<float>(float) noexcept;
template double gelu<double>(double) noexcept;
template float gelu_grad<float>(float) noexcept;
template double gelu_grad<double>(double) noexcept;

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class Mlp<float>;
template class Mlp<double>;
template class SpectralMixer<float>;
template class SpectralMixer<double>;
template class AfnoBlock<float>;
template class AfnoBlock<double>;
template class TokenNet<float>;
template class TokenNet<double>;

}  // namespace wxe
