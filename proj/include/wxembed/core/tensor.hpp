#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wxembed/core/error.hpp"

namespace wxe {

/// Row-major dense matrix; token activations are [tokens, features].
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Dense 4-D tensor in [B, C, H, W] order.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t b, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
      : shape_{b, c, h, w}, data_(b * c * h * w, fill) {}

  const std::array<std::size_t, 4>& shape() const noexcept { return shape_; }
  std::size_t batch() const noexcept { return shape_[0]; }
  std::size_t channels() const noexcept { return shape_[1]; }
  std::size_t height() const noexcept { return shape_[2]; }
  std::size_t width() const noexcept { return shape_[3]; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return shape_[2] * shape_[3]; }

  T& operator()(std::size_t b, std::size_t c, std::size_t i, std::size_t j) noexcept {
    return data_[((b * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }
  const T& operator()(std::size_t b, std::size_t c, std::size_t i, std::size_t j) const noexcept {
    return data_[((b * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }

  /// Contiguous H*W plane for (b, c).
  std::span<T> plane(std::size_t b, std::size_t c) noexcept {
    return {data_.data() + (b * shape_[1] + c) * plane(), plane()};
  }
  std::span<const T> plane(std::size_t b, std::size_t c) const noexcept {
    return {data_.data() + (b * shape_[1] + c) * plane(), plane()};
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(shape_[0], shape_[1], shape_[2], shape_[3]);
    for (std::size_t k = 0; k < data_.size(); ++k) out.data()[k] = static_cast<U>(data_[k]);
    return out;
  }

  bool operator==(const Tensor4&) const = default;

 private:
  std::array<std::size_t, 4> shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

std::string shape_string(const std::array<std::size_t, 4>& s);

}  // namespace wxe
