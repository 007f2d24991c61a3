#include "wxembed/nn/dft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wxembed/core/error.hpp"

namespace wxe {

namespace {

template <typename T>
void twiddles(std::size_t n, Mat<T>& re, Mat<T>& im) {
  re.resize(static_cast<long>(n), static_cast<long>(n));
  im.resize(static_cast<long>(n), static_cast<long>(n));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < n; ++m) {
      // Reduce k*m mod n first so the angle stays small and exact multiples of pi/2 land exactly.
      const double a = -2.0 * std::numbers::pi * static_cast<double>((k * m) % n) / static_cast<double>(n);
      re(long(k), long(m)) = static_cast<T>(std::cos(a) * scale);
      im(long(k), long(m)) = static_cast<T>(std::sin(a) * scale);
    }
  }
}

template <typename T>
using CMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MMap = Eigen::Map<Mat<T>>;

}  // namespace

template <typename T>
Dft2d<T>::Dft2d(std::size_t h, std::size_t w) : h_(h), w_(w) {
  if (h == 0 || w == 0) throw UsageError("empty DFT grid");
  twiddles<T>(h, fh_re_, fh_im_);
  twiddles<T>(w, fw_re_, fw_im_);
}

template <typename T>
void Dft2d<T>::apply(const T* in_re, const T* in_im, std::size_t d, T* out_re, T* out_im, bool inverse) const {
  const long h = long(h_), w = long(w_), D = long(d);
  const T sign = inverse ? T(-1) : T(1);  // conjugate twiddles for the inverse
  Mat<T> yr(h * w, D), yi(h * w, D);
  // Along each grid row: Y_i = Fw X_i.
  for (long i = 0; i < h; ++i) {
    CMap<T> xr(in_re + i * w * D, w, D);
    auto yr_i = yr.middleRows(i * w, w);
    auto yi_i = yi.middleRows(i * w, w);
    yr_i.noalias() = fw_re_ * xr;
    yi_i.noalias() = sign * fw_im_ * xr;
    if (in_im) {
      CMap<T> xi(in_im + i * w * D, w, D);
      yr_i.noalias() -= sign * fw_im_ * xi;
      yi_i.noalias() += fw_re_ * xi;
    }
  }
  // Along each grid column: viewing Y as h x (w*d), Z = Fh Y.
  CMap<T> yr2(yr.data(), h, w * D), yi2(yi.data(), h, w * D);
  MMap<T> zr(out_re, h, w * D), zi(out_im, h, w * D);
  zr.noalias() = fh_re_ * yr2;
  zr.noalias() -= sign * fh_im_ * yi2;
  zi.noalias() = fh_re_ * yi2;
  zi.noalias() += sign * fh_im_ * yr2;
}

template <typename T>
void Dft2d<T>::forward(const T* in_re, const T* in_im, std::size_t d, T* out_re, T* out_im) const {
  apply(in_re, in_im, d, out_re, out_im, false);
}

template <typename T>
void Dft2d<T>::inverse(const T* in_re, const T* in_im, std::size_t d, T* out_re, T* out_im) const {
  apply(in_re, in_im, d, out_re, out_im, true);
}

template <typename T>
void Dft2d<T>::inverse_real(const T* in_re, const T* in_im, std::size_t d, T* out_re) const {
  const long h = long(h_), w = long(w_), D = long(d);
  Mat<T> yr(h * w, D), yi(h * w, D);
  for (long i = 0; i < h; ++i) {
    CMap<T> xr(in_re + i * w * D, w, D);
    CMap<T> xi(in_im + i * w * D, w, D);
    auto yr_i = yr.middleRows(i * w, w);
    auto yi_i = yi.middleRows(i * w, w);
    yr_i.noalias() = fw_re_ * xr;
    yr_i.noalias() += fw_im_ * xi;
    yi_i.noalias() = fw_re_ * xi;
    yi_i.noalias() -= fw_im_ * xr;
  }
  CMap<T> yr2(yr.data(), h, w * D), yi2(yi.data(), h, w * D);
  MMap<T> zr(out_re, h, w * D);
  zr.noalias() = fh_re_ * yr2;
  zr.noalias() += fh_im_ * yi2;
}

std::vector<std::size_t> kept_modes(std::size_t h, std::size_t w, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) throw UsageError("mode_keep_fraction must lie in (0, 1]");
  auto keep = [fraction](std::size_t n) {
    const std::size_t modes = n / 2 + 1;
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(modes) - 1e-12));
    return std::clamp<std::size_t>(k, 1, modes);
  };
  const long kh = long(keep(h)), kw = long(keep(w));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < h; ++i) {
    if (std::abs(signed_frequency(i, h)) >= kh) continue;
    for (std::size_t j = 0; j < w; ++j) {
      if (std::abs(signed_frequency(j, w)) >= kw) continue;
      out.push_back(i * w + j);
    }
  }
  return out;
}

template class Dft2d<float>;
template class Dft2d<double>;

}  // namespace wxe
