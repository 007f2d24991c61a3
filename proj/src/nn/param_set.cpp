#include "wxembed/nn/param_set.hpp"

#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"
#include "wxembed/core/rng.hpp"

namespace wxe {

template <typename T>
std::size_t ParamSet<T>::add(std::string name, std::vector<std::size_t> shape, Init init) {
  if (find(name)) throw UsageError("duplicate parameter '" + name + "'");
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  tensors_.push_back({std::move(name), std::move(shape), std::vector<T>(n, T(0)), init});
  return tensors_.size() - 1;
}

template <typename T>
std::optional<std::size_t> ParamSet<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  return std::nullopt;
}

template <typename T>
std::size_t ParamSet<T>::numel() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.data.size();
  return n;
}

template <typename T>
void ParamSet<T>::initialize(std::uint64_t seed, double sigma) {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto& t = tensors_[i];
    switch (t.init) {
      case Init::Zeros:
        std::fill(t.data.begin(), t.data.end(), T(0));
        break;
      case Init::Ones:
        std::fill(t.data.begin(), t.data.end(), T(1));
        break;
      case Init::TruncNormal: {
        Rng rng(seed, {i});
        for (auto& v : t.data) v = static_cast<T>(rng.truncated_normal(sigma));
        break;
      }
    }
  }
}

template <typename T>
void ParamSet<T>::zero() {
  for (auto& t : tensors_) std::fill(t.data.begin(), t.data.end(), T(0));
}

template <typename T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out(role_);
  for (const auto& t : tensors_) out.add(t.name, t.shape, t.init);
  return out;
}

template <typename T>
std::uint64_t ParamSet<T>::fingerprint() const {
  Fnv1a64 h;
  h.update(role_);
  for (const auto& t : tensors_) {
    h.update(t.name);
    const std::uint64_t rank = t.shape.size();
    h.update(&rank, sizeof rank);
    for (std::uint64_t d : t.shape) h.update(&d, sizeof d);
    h.update(t.data.data(), t.data.size() * sizeof(T));
  }
  return h.digest();
}

template class ParamSet<float>;
template class ParamSet<double>;

}  // namespace wxe
