#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wxembed/core/tensor.hpp"

namespace wxe {

enum class Init { Zeros, Ones, TruncNormal };

template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> data;
  Init init = Init::Zeros;

  std::size_t numel() const noexcept { return data.size(); }
  bool operator==(const ParamTensor&) const = default;
};

/// Ordered, uniquely named trainable tensors for one model role.
template <typename T>
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::string role) : role_(std::move(role)) {}

  const std::string& role() const noexcept { return role_; }

  /// Registers a zero-filled tensor and returns its index. Throws on duplicate names.
  std::size_t add(std::string name, std::vector<std::size_t> shape, Init init);

  std::size_t size() const noexcept { return tensors_.size(); }
  ParamTensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const ParamTensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  const std::vector<ParamTensor<T>>& tensors() const noexcept { return tensors_; }
  std::vector<ParamTensor<T>>& tensors() noexcept { return tensors_; }
  std::optional<std::size_t> find(const std::string& name) const;

  T* data(std::size_t i) noexcept { return tensors_[i].data.data(); }
  const T* data(std::size_t i) const noexcept { return tensors_[i].data.data(); }

  std::size_t numel() const noexcept;

  /// Fills every tensor according to its Init tag. Tensor i draws from stream (seed, i).
  void initialize(std::uint64_t seed, double sigma = 0.02);
  void zero();

  /// Same names/shapes, all zeros (gradient buffers, optimizer moments).
  ParamSet zeros_like() const;

  /// 64-bit content hash over role, names, shapes and raw element bytes.
  std::uint64_t fingerprint() const;

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out(role_);
    for (const auto& t : tensors_) {
      const auto i = out.add(t.name, t.shape, t.init);
      for (std::size_t k = 0; k < t.data.size(); ++k) out[i].data[k] = static_cast<U>(t.data[k]);
    }
    return out;
  }

  bool operator==(const ParamSet&) const = default;

 private:
  std::string role_;
  std::vector<ParamTensor<T>> tensors_;
};

extern template class ParamSet<float>;
extern template class ParamSet<double>;

}  // namespace wxe
