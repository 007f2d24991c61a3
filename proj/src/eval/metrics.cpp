#include "wxembed/eval/metrics.hpp"

#include <cmath>
#include <numbers>

#include "wxembed/core/error.hpp"

namespace wxe {
namespace {

void check_pair(FieldView a, FieldView b, const LandSeaMask* mask) {
  if (a.height != b.height || a.width != b.width) {
    throw UsageError("metric fields differ in shape: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                     " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
  }
  if (a.values.size() != a.height * a.width || b.values.size() != b.height * b.width) {
    throw UsageError("metric field storage does not match its shape");
  }
  if (mask && (mask->n_lat() != a.height || mask->n_lon() != a.width)) {
    throw UsageError("land-sea mask grid does not match the metric fields");
  }
}

// Valid-mode separable correlation of a row-major [h, w] plane with `taps` along both axes.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t n = taps.size();
  const std::size_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += taps[k] * src[i * w + j + k];
      rows[i * ow + j] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += taps[k] * rows[(i + k) * ow + j];
      out[i * ow + j] = acc;
    }
  }
  return out;
}

}  // namespace

double rmse(FieldView pred, FieldView truth, const LandSeaMask* mask, bool lat_weighted) {
  check_pair(pred, truth, mask);
  double sum = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < pred.height; ++i) {
    const double lat = 90.0 - (double(i) + 0.5) * 180.0 / double(pred.height);
    const double wrow = lat_weighted ? std::cos(lat * std::numbers::pi / 180.0) : 1.0;
    for (std::size_t j = 0; j < pred.width; ++j) {
      if (mask && !mask->land(i, j)) continue;
      const double e = double(pred.values[i * pred.width + j]) - double(truth.values[i * pred.width + j]);
      sum += wrow * e * e;
      weight += wrow;
    }
  }
  if (weight <= 0.0) throw UsageError("rmse: every cell is masked out");
  return std::sqrt(sum / weight);
}

std::vector<double> gaussian_taps(std::size_t n, double sigma) {
  if (n % 2 == 0 || n == 0) throw UsageError("ssim window must be odd, got " + std::to_string(n));
  if (!(sigma > 0.0)) throw UsageError("ssim Gaussian sigma must be positive");
  std::vector<double> taps(n);
  const double r = double(n / 2);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = double(k) - r;
    taps[k] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += taps[k];
  }
  for (double& t : taps) t /= total;
  return taps;
}

double ssim(FieldView pred, FieldView truth, double data_range, const LandSeaMask* mask, const SsimOptions& opts,
            std::vector<std::string>* warnings) {
  check_pair(pred, truth, mask);
  if (!(data_range > 0.0) || !std::isfinite(data_range)) {
    throw UsageError("ssim data range must be positive, got " + std::to_string(data_range));
  }
  const std::size_t h = pred.height, w = pred.width;
  std::size_t n = opts.window;
  if (n % 2 == 0) throw UsageError("ssim window must be odd, got " + std::to_string(n));
  if (h < n || w < n) {
    std::size_t fit = std::min(h, w);
    if (fit % 2 == 0) --fit;
    if (fit < 3) throw UsageError("ssim grid " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than 3x3");
    if (warnings) {
      warnings->push_back("ssim window reduced from " + std::to_string(n) + " to " + std::to_string(fit) +
                          " to fit a " + std::to_string(h) + "x" + std::to_string(w) + " grid");
    }
    n = fit;
  }
  const auto taps = gaussian_taps(n, opts.sigma);

  std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
  for (std::size_t c = 0; c < h * w; ++c) {
    x[c] = pred.values[c];
    y[c] = truth.values[c];
    xx[c] = x[c] * x[c];
    yy[c] = y[c] * y[c];
    xy[c] = x[c] * y[c];
  }
  const auto mx = filter_valid(x, h, w, taps);
  const auto my = filter_valid(y, h, w, taps);
  const auto mxx = filter_valid(xx, h, w, taps);
  const auto myy = filter_valid(yy, h, w, taps);
  const auto mxy = filter_valid(xy, h, w, taps);

  const double c1 = (opts.k1 * data_range) * (opts.k1 * data_range);
  const double c2 = (opts.k2 * data_range) * (opts.k2 * data_range);
  const std::size_t r = n / 2, oh = h - n + 1, ow = w - n + 1;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      if (mask && !mask->land(i + r, j + r)) continue;
      const std::size_t o = i * ow + j;
      const double vx = mxx[o] - mx[o] * mx[o];
      const double vy = myy[o] - my[o] * my[o];
      const double cxy = mxy[o] - mx[o] * my[o];
      const double num = (2.0 * mx[o] * my[o] + c1) * (2.0 * cxy + c2);
      const double den = (mx[o] * mx[o] + my[o] * my[o] + c1) * (vx + vy + c2);
      sum += num / den;
      ++count;
    }
  }
  if (count == 0) throw UsageError("ssim: every window center is masked out");
  return sum / double(count);
}

MeanSigma mean_sigma(std::span<const double> xs) {
  MeanSigma out;
  if (xs.empty()) return out;
  double s = 0.0;
  for (double v : xs) s += v;
  out.mean = s / double(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double v : xs) ss += (v - out.mean) * (v - out.mean);
  out.sigma = std::sqrt(ss / double(xs.size() - 1));
  return out;
}

}  // namespace wxe
