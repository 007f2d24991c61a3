#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace wxe {

/// Incremental 64-bit FNV-1a. Each input byte passes through a bijection of the
/// running state, so any single-byte change in the input changes the digest.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void update(std::span<const std::byte> bytes) noexcept {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= kPrime;
    }
  }
  void update(const void* data, std::size_t n) noexcept {
    update(std::span<const std::byte>(static_cast<const std::byte*>(data), n));
  }
  void update(std::string_view s) noexcept { update(s.data(), s.size()); }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n) noexcept {
  Fnv1a64 h;
  h.update(data, n);
  return h.digest();
}

/// Lower-case 16-digit hex rendering used in manifests and logs.
std::string to_hex(std::uint64_t v);

}  // namespace wxe
