#pragma once

#include <span>
#include <string>
#include <vector>

#include "wxembed/data/state.hpp"

namespace wxe {

/// Row-major [h, w] view of one field.
struct FieldView {
  std::span<const float> values;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Square root of the mean squared difference over counted cells (mask 1 = counted,
/// null = all). With `lat_weighted`, cells are weighted by the cosine of their
/// latitude on an equiangular grid running from 90N to 90S.
double rmse(FieldView pred, FieldView truth, const LandSeaMask* mask = nullptr, bool lat_weighted = false);

struct SsimOptions {
  std::size_t window = 11;  // odd
  double sigma = 1.5;       // Gaussian window width
  double k1 = 0.01;
  double k2 = 0.03;
  bool operator==(const SsimOptions&) const = default;
};

/// Mean local structural similarity over every window that fits inside the grid
/// (no padding), with Gaussian-weighted moments and C1 = (k1 L)^2, C2 = (k2 L)^2.
/// Windows whose center cell is masked out are skipped. When the grid is smaller than
/// the window, the largest odd window that fits is used (at least 3) and a note is
/// appended to `warnings`. Throws UsageError for L <= 0, mismatched shapes, a grid
/// under 3x3 or a mask that removes every window.
double ssim(FieldView pred, FieldView truth, double data_range, const LandSeaMask* mask = nullptr,
            const SsimOptions& opts = {}, std::vector<std::string>* warnings = nullptr);

/// Normalized 1-D Gaussian taps of odd length `n`.
std::vector<double> gaussian_taps(std::size_t n, double sigma);

struct MeanSigma {
  double mean = 0.0;
  double sigma = 0.0;  // sample standard deviation (n - 1); 0 for fewer than two values
};
MeanSigma mean_sigma(std::span<const double> xs);

}  // namespace wxe
