#pragma once

#include <cstddef>
#include <vector>

#include "wxembed/core/tensor.hpp"

namespace wxe {

/// Orthonormal 2-D discrete Fourier transform over an h x w token grid, applied
/// to every feature column at once.
///
/// Operands are [h*w, d] matrices with row index i*w + j. The transform is
/// separable: a w-point DFT along each grid row followed by an h-point DFT along
/// each grid column, both as dense twiddle-matrix products so any grid size works.
/// Forward uses exp(-2 pi i k n / N) / sqrt(N); inverse is its adjoint, so the
/// pair is unitary and preserves energy.
template <typename T>
class Dft2d {
 public:
  Dft2d() = default;
  Dft2d(std::size_t h, std::size_t w);

  std::size_t h() const noexcept { return h_; }
  std::size_t w() const noexcept { return w_; }

  /// Complex-to-complex transform. `in_im` may be null for a real input.
  void forward(const T* in_re, const T* in_im, std::size_t d, T* out_re, T* out_im) const;
  void inverse(const T* in_re, const T* in_im, std::size_t d, T* out_re, T* out_im) const;
  /// Real part of the inverse transform only.
  void inverse_real(const T* in_re, const T* in_im, std::size_t d, T* out_re) const;

 private:
  void apply(const T* in_re, const T* in_im, std::size_t d, T* out_re, T* out_im, bool inverse) const;

  std::size_t h_ = 0, w_ = 0;
  Mat<T> fh_re_, fh_im_, fw_re_, fw_im_;  // forward twiddles; inverse uses the conjugate
};

/// Signed frequency of DFT bin k for an n-point transform.
inline long signed_frequency(std::size_t k, std::size_t n) noexcept {
  return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

/// Row indices (i*w + j) of the bins whose signed frequencies along both axes are
/// among the lowest ceil(fraction * (n/2 + 1)) per axis.
std::vector<std::size_t> kept_modes(std::size_t h, std::size_t w, double fraction);

extern template class Dft2d<float>;
extern template class Dft2d<double>;

}  // namespace wxe
