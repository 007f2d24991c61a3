#pragma once

// Brute-force reference metrics, written independently of src/eval: direct 2-D window
// sums and two-pass central moments instead of separable filtering of raw moments.

#include <cmath>
#include <cstdint>
#include <vector>

namespace wxe::testing {

inline double oracle_rmse(const std::vector<float>& a, const std::vector<float>& b,
                          const std::vector<std::uint8_t>* keep = nullptr) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (keep && !(*keep)[k]) continue;
    s += (double(a[k]) - double(b[k])) * (double(a[k]) - double(b[k]));
    ++n;
  }
  return std::sqrt(s / double(n));
}

inline double oracle_ssim(const std::vector<float>& a, const std::vector<float>& b, std::size_t h, std::size_t w,
                          double range, std::size_t win = 11, double sigma = 1.5,
                          const std::vector<std::uint8_t>* keep = nullptr) {
  const long r = long(win / 2);
  std::vector<double> g2(win * win);
  double z = 0.0;
  for (long u = -r; u <= r; ++u) {
    for (long v = -r; v <= r; ++v) {
      const double e = std::exp(-double(u * u + v * v) / (2.0 * sigma * sigma));
      g2[std::size_t((u + r) * long(win) + v + r)] = e;
      z += e;
    }
  }
  for (double& e : g2) e /= z;
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  double total = 0.0;
  std::size_t count = 0;
  for (long ci = r; ci < long(h) - r; ++ci) {
    for (long cj = r; cj < long(w) - r; ++cj) {
      if (keep && !(*keep)[std::size_t(ci) * w + std::size_t(cj)]) continue;
      double ma = 0.0, mb = 0.0;
      for (long u = -r; u <= r; ++u) {
        for (long v = -r; v <= r; ++v) {
          const double wt = g2[std::size_t((u + r) * long(win) + v + r)];
          const std::size_t k = std::size_t(ci + u) * w + std::size_t(cj + v);
          ma += wt * a[k];
          mb += wt * b[k];
        }
      }
      double va = 0.0, vb = 0.0, cab = 0.0;
      for (long u = -r; u <= r; ++u) {
        for (long v = -r; v <= r; ++v) {
          const double wt = g2[std::size_t((u + r) * long(win) + v + r)];
          const std::size_t k = std::size_t(ci + u) * w + std::size_t(cj + v);
          va += wt * (a[k] - ma) * (a[k] - ma);
          vb += wt * (b[k] - mb) * (b[k] - mb);
          cab += wt * (a[k] - ma) * (b[k] - mb);
        }
      }
      total += (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / double(count);
}

}  // namespace wxe::testing
