#pragma once

#include <cstdint>

#include "wxembed/data/dataset.hpp"

namespace wxe {

struct SynthOptions {
  Hour start = make_hour(2020, 1, 1, 0);
  int step_hours = 1;
  std::size_t modes_per_channel = 16;
};

/// Seeded desk-scale stand-in for reanalysis data over the default catalog.
///
/// Prognostic channels: sums of Fourier modes with amplitude |k|^-2, advected by
/// per-channel phase speeds, mapped affinely into a plausible physical range.
/// Diagnostics: tcc = logistic(2 r850~ + tcwv~ - 0.5) with ~ denoting
/// standardization over the whole generated channel; stl1 = 0.9 t2m + 5 K plus
/// spatially smoothed unit-variance noise. The land-sea mask thresholds a
/// low-frequency field at its median. Every random draw comes from a stream
/// derived by counter from `seed`, so the output is a pure function of the inputs.
Dataset synth_dataset(const GridSpec& grid, std::size_t n_times, std::uint64_t seed,
                      const SynthOptions& opts = {});

/// Plausible physical range used to place a prognostic variable.
DataRange synth_range(const VariableEntry& e);

}  // namespace wxe
