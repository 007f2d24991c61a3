#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"

namespace wxe::io {

template <typename T>
T to_little(T v) noexcept {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

/// Output stream wrapper that keeps a running FNV-1a over everything written.
class HashingWriter {
 public:
  explicit HashingWriter(std::ostream& os) : os_(os) {}

  void bytes(const void* p, std::size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os_) throw Error("write failed");
    hash_.update(p, n);
  }
  template <typename T>
  void value(T v) {
    v = to_little(v);
    bytes(&v, sizeof(T));
  }
  template <typename T>
  void array(std::span<const T> xs) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(xs.data(), xs.size_bytes());
    } else {
      for (T x : xs) value(x);
    }
  }
  /// Writes the digest of everything so far (not itself hashed).
  void trailer() {
    std::uint64_t d = to_little(hash_.digest());
    os_.write(reinterpret_cast<const char*>(&d), sizeof d);
    if (!os_) throw Error("write failed");
  }
  std::uint64_t digest() const noexcept { return hash_.digest(); }

 private:
  std::ostream& os_;
  Fnv1a64 hash_;
};

/// Bounds-checked little-endian cursor over an in-memory buffer.
class Reader {
 public:
  explicit Reader(std::span<const std::byte> buf) : buf_(buf) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

  std::span<const std::byte> take(std::size_t n, const char* what) {
    if (n > remaining()) {
      throw FormatError(FormatError::Kind::Truncated,
                        std::string("truncated while reading ") + what);
    }
    auto s = buf_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T value(const char* what) {
    T v;
    std::memcpy(&v, take(sizeof(T), what).data(), sizeof(T));
    return to_little(v);
  }
  template <typename T>
  void array(std::span<T> out, const char* what) {
    auto s = take(out.size_bytes(), what);
    std::memcpy(out.data(), s.data(), s.size());
    if constexpr (std::endian::native != std::endian::little) {
      for (T& x : out) x = to_little(x);
    }
  }

 private:
  std::span<const std::byte> buf_;
  std::size_t pos_ = 0;
};

/// Reads a whole file into memory.
std::vector<std::byte> slurp(const std::string& path);

}  // namespace wxe::io
