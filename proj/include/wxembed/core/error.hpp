#pragma once

#include <stdexcept>
#include <string>

namespace wxe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, shape or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Binary container problems (WXD1 datasets, WXC1 checkpoints).
class FormatError : public Error {
 public:
  enum class Kind { BadMagic, BadHeader, Truncated, ChecksumMismatch, ShapeMismatch, OutOfRange };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A numerical quantity went non-finite (NaN loss, NaN gradient, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The frozen encoder was modified during downstream training.
class FreezeViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace wxe
