#pragma once

#include <stdexcept>
#include <string>

namespace onnpic {

// Error taxonomy used across the library. Everything derives from Error so
// callers can catch the whole family at the CLI boundary.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or channel-count disagreement between tensors.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Invalid argument value (non-positive stride, empty batch, ...).
struct ArgumentError : Error {
  explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Value outside the mathematical domain of an operation.
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Malformed or truncated bitstream / checkpoint.
struct DecodeError : Error {
  explicit DecodeError(const std::string& msg) : Error(msg) {}
};

// A computation that cannot proceed (no curve overlap, non-finite loss).
struct ComputationError : Error {
  explicit ComputationError(const std::string& msg) : Error(msg) {}
};

// Invalid model / training configuration detected at build time.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace onnpic
