#include "wxembed/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "wxembed/core/error.hpp"
#include "wxembed/core/rng.hpp"

namespace wxe {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Stream ids under the master seed.
enum : std::uint64_t { kStreamChannel = 1, kStreamNoise = 2, kStreamMask = 3 };

struct Mode {
  int kx;
  int ky;
  double amp;
  double phase;
};

std::vector<Mode> draw_modes(Rng& rng, std::size_t n, int kx_max, int ky_max) {
  std::vector<Mode> modes;
  modes.reserve(n);
  while (modes.size() < n) {
    const int kx = static_cast<int>(rng.integer(0, kx_max));
    const int ky = static_cast<int>(rng.integer(0, ky_max));
    if (kx == 0 && ky == 0) continue;
    const double k = std::hypot(double(kx), double(ky));
    modes.push_back({kx, ky, 1.0 / (k * k), rng.uniform(0.0, kTwoPi)});
  }
  return modes;
}

// Standard-atmosphere height (km) of a pressure level.
double level_height_km(int hpa) { return 44.331 * (1.0 - std::pow(hpa / 1013.25, 0.190263)); }

// Sum of advected modes at time t, scaled into [-1, 1].
void render_modes(const std::vector<Mode>& modes, double cu, double cv, double t, std::size_t H, std::size_t W,
                  std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  double norm = 0.0;
  std::vector<std::complex<double>> col(W);
  for (const auto& m : modes) {
    norm += m.amp;
    const double theta = m.phase - kTwoPi * (m.kx * cu * t / double(W) + m.ky * cv * t / double(H));
    const std::complex<double> c = std::polar(m.amp, theta);
    for (std::size_t j = 0; j < W; ++j) col[j] = c * std::polar(1.0, kTwoPi * m.kx * double(j) / double(W));
    for (std::size_t i = 0; i < H; ++i) {
      const std::complex<double> r = std::polar(1.0, kTwoPi * m.ky * double(i) / double(H));
      double* row = out.data() + i * W;
      for (std::size_t j = 0; j < W; ++j) row[j] += (col[j] * r).real();
    }
  }
  for (double& v : out) v /= norm;
}

// 3x3 box filter, periodic in longitude, clamped in latitude.
void box_smooth(std::vector<double>& f, std::size_t H, std::size_t W) {
  std::vector<double> g(f.size());
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      double s = 0.0;
      for (int di = -1; di <= 1; ++di) {
        const auto ii = static_cast<std::size_t>(std::clamp<long>(long(i) + di, 0, long(H) - 1));
        for (int dj = -1; dj <= 1; ++dj) {
          const auto jj = (j + W + static_cast<std::size_t>(dj + 1) - 1) % W;
          s += f[ii * W + jj];
        }
      }
      g[i * W + j] = s / 9.0;
    }
  }
  f.swap(g);
}

void standardize(std::vector<double>& f) {
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= double(f.size());
  double ss = 0.0;
  for (double v : f) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / double(f.size()));
  for (double& v : f) v = sd > 0.0 ? (v - mean) / sd : 0.0;
}

std::pair<double, double> channel_moments(const Tensor4<float>& d, std::size_t c) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < d.batch(); ++t) {
    for (float v : d.plane(t, c)) sum += v;
    n += d.plane();
  }
  const double mean = sum / double(n);
  double ss = 0.0;
  for (std::size_t t = 0; t < d.batch(); ++t) {
    for (float v : d.plane(t, c)) ss += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(ss / double(n))};
}

}  // namespace

DataRange synth_range(const VariableEntry& e) {
  if (e.data_range) return *e.data_range;
  if (e.is_surface()) {
    if (e.name == "u10" || e.name == "v10") return {-20.0, 20.0};
    if (e.name == "u100" || e.name == "v100") return {-30.0, 30.0};
    if (e.name == "t2m") return {250.0, 305.0};
    if (e.name == "d2m") return {240.0, 295.0};
    if (e.name == "msl") return {97000.0, 104000.0};
    if (e.name == "sp") return {60000.0, 105000.0};
    if (e.name == "tcwv") return {0.0, 70.0};
    return {-1.0, 1.0};
  }
  const double zkm = level_height_km(*e.level_hpa);
  switch (e.name.front()) {
    case 't': {
      const double c = std::max(215.0, 288.0 - 6.5 * zkm);
      return {c - 22.0, c + 22.0};
    }
    case 'u':
    case 'v': {
      const double a = 15.0 + 2.0 * zkm;
      return {-a, a};
    }
    case 'z': {
      const double c = 9.80665 * 1000.0 * zkm;
      const double a = 400.0 + 0.03 * c;
      return {c - a, c + a};
    }
    case 'r':
      return {0.0, 100.0};
    default:
      return {-1.0, 1.0};
  }
}

Dataset synth_dataset(const GridSpec& grid, std::size_t n_times, std::uint64_t seed, const SynthOptions& opts) {
  grid.validate();
  if (n_times < 1) throw UsageError("n_times must be >= 1");
  const std::size_t H = grid.n_lat, W = grid.n_lon;

  Dataset ds;
  ds.grid = grid;
  ds.catalog = make_default_catalog();
  ds.start = opts.start;
  ds.step_hours = opts.step_hours;
  ds.seed = seed;
  ds.data = Tensor4<float>(n_times, ds.catalog.size(), H, W);

  const int kx_max = std::max<int>(1, static_cast<int>(W / 16));
  const int ky_max = std::max<int>(1, static_cast<int>(H / 16));
  std::vector<double> field(H * W);

  for (std::size_t c : ds.catalog.indices(Role::Prognostic)) {
    Rng rng(seed, {kStreamChannel, c});
    const auto modes = draw_modes(rng, opts.modes_per_channel, kx_max, ky_max);
    const double cu = rng.uniform(-0.5, 0.5);
    const double cv = rng.uniform(-0.1, 0.1);
    const auto range = synth_range(ds.catalog[c]);
    for (std::size_t t = 0; t < n_times; ++t) {
      render_modes(modes, cu, cv, double(t) * opts.step_hours, H, W, field);
      auto dst = ds.data.plane(t, c);
      for (std::size_t k = 0; k < field.size(); ++k) {
        dst[k] = static_cast<float>(range.lo + range.span() * 0.5 * (field[k] + 1.0));
      }
    }
  }

  const auto& cat = ds.catalog;
  const std::size_t c_r850 = cat.index_of("r850"), c_tcwv = cat.index_of("tcwv"), c_t2m = cat.index_of("t2m");
  const std::size_t c_tcc = cat.index_of("tcc"), c_stl1 = cat.index_of("stl1");
  const auto [r_mean, r_sd] = channel_moments(ds.data, c_r850);
  const auto [w_mean, w_sd] = channel_moments(ds.data, c_tcwv);
  const auto stl_range = *cat[c_stl1].data_range;

  for (std::size_t t = 0; t < n_times; ++t) {
    auto r = ds.data.plane(t, c_r850);
    auto q = ds.data.plane(t, c_tcwv);
    auto tcc = ds.data.plane(t, c_tcc);
    for (std::size_t k = 0; k < tcc.size(); ++k) {
      const double x = 2.0 * (r[k] - r_mean) / r_sd + (q[k] - w_mean) / w_sd - 0.5;
      tcc[k] = static_cast<float>(1.0 / (1.0 + std::exp(-x)));
    }

    Rng rng(seed, {kStreamNoise, t});
    for (double& v : field) v = rng.normal();
    box_smooth(field, H, W);
    box_smooth(field, H, W);
    standardize(field);
    auto t2m = ds.data.plane(t, c_t2m);
    auto stl1 = ds.data.plane(t, c_stl1);
    for (std::size_t k = 0; k < stl1.size(); ++k) {
      const double v = 0.9 * t2m[k] + 5.0 + field[k];
      stl1[k] = static_cast<float>(std::clamp(v, stl_range.lo, stl_range.hi));
    }
  }

  {
    Rng rng(seed, {kStreamMask});
    const auto modes = draw_modes(rng, 6, 2, 2);
    render_modes(modes, 0.0, 0.0, 0.0, H, W, field);
    std::vector<double> sorted = field;
    const auto mid = sorted.begin() + static_cast<long>(sorted.size() / 2) - 1;
    std::nth_element(sorted.begin(), mid, sorted.end());
    const double median = *mid;
    std::vector<std::uint8_t> cells(field.size());
    for (std::size_t k = 0; k < field.size(); ++k) cells[k] = field[k] > median ? 1 : 0;
    // Ties at the median could leave one class empty; force one cell of each.
    const auto land = std::count(cells.begin(), cells.end(), std::uint8_t{1});
    if (land == 0) cells.front() = 1;
    if (land == static_cast<long>(cells.size())) cells.front() = 0;
    ds.mask = LandSeaMask(H, W, std::move(cells));
  }
  return ds;
}

}  // namespace wxe
