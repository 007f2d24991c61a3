#include "wxembed/training/loss.hpp"

#include "wxembed/core/error.hpp"

namespace wxe {

template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target, const LandSeaMask* mask) {
  if (pred.shape() != target.shape()) {
    throw UsageError("loss shapes differ: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  }
  const std::size_t plane = pred.plane();
  if (mask && (mask->n_lat() != pred.height() || mask->n_lon() != pred.width())) {
    throw UsageError("loss mask does not match the field grid");
  }
  const std::size_t per_plane = mask ? mask->land_count() : plane;
  const std::size_t n = per_plane * pred.batch() * pred.channels();
  if (n == 0) throw UsageError("loss mask excludes every cell");

  LossResult<T> out;
  out.grad = Tensor4<T>(pred.batch(), pred.channels(), pred.height(), pred.width());
  const double scale = 2.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t b = 0; b < pred.batch(); ++b)
    for (std::size_t c = 0; c < pred.channels(); ++c) {
      const auto p = pred.plane(b, c);
      const auto t = target.plane(b, c);
      auto g = out.grad.plane(b, c);
      for (std::size_t k = 0; k < plane; ++k) {
        if (mask && !mask->cells()[k]) continue;
        const double e = static_cast<double>(p[k]) - static_cast<double>(t[k]);
        sum += e * e;
        g[k] = static_cast<T>(scale * e);
      }
    }
  out.loss = sum / static_cast<double>(n);
  return out;
}

template LossResult<float> mse_loss(const Tensor4<float>&, const Tensor4<float>&, const LandSeaMask*);
template LossResult<double> mse_loss(const Tensor4<double>&, const Tensor4<double>&, const LandSeaMask*);

}  // namespace wxe
