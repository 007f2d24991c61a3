#pragma once

#include "wxembed/core/tensor.hpp"
#include "wxembed/data/state.hpp"

namespace wxe {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor4<T> grad;  // dL/dpred, same shape as pred
};

/// Mean squared error over unmasked cells. `mask` (1 = counted) is broadcast over
/// batch and channels; null counts every cell. Gradient is 2 (pred - target) / N at
/// counted cells and 0 elsewhere. Throws UsageError on shape mismatch or when no cell
/// is counted.
template <typename T>
LossResult<T> mse_loss(const Tensor4<T>& pred, const Tensor4<T>& target, const LandSeaMask* mask = nullptr);

extern template LossResult<float> mse_loss(const Tensor4<float>&, const Tensor4<float>&, const LandSeaMask*);
extern template LossResult<double> mse_loss(const Tensor4<double>&, const Tensor4<double>&, const LandSeaMask*);

}  // namespace wxe
