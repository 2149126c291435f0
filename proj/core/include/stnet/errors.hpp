#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stnet {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed network config or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated binary input (weight files, Netpbm images).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        detail_(what),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }
  // Message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::uint64_t offset_;
};

// Every active gating node of some layer had no positive PS activity, or
// bridge pruning found nothing to keep.
class TdPassDied : public Error {
 public:
  explicit TdPassDied(const std::string& layer)
      : Error("TD pass died at layer '" + layer + "'"), layer_(layer) {}

  const std::string& layer() const noexcept { return layer_; }

 private:
  std::string layer_;
};

// The thresholded attention map had no nonzero cell.
class NoAttendedRegion : public Error {
 public:
  NoAttendedRegion() : Error("no attended region") {}
};

}  // namespace stnet
