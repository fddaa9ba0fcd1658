#pragma once

#include <stdexcept>
#include <string>

namespace neuralign {

// Numerical failure: non-finite values, factorization breakdown, divergence.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File-level failure with a structured kind so callers can map to exit codes
// and tests can distinguish a checksum mismatch from a malformed manifest.
class IoError : public std::runtime_error {
 public:
  enum class Kind { file, format, checksum };

  IoError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace neuralign
