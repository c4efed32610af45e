#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cggan {

/// Precondition violated by the caller (bad dimension, negative threshold, ...).
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative numerical kernel failed to converge.
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed file. Carries the byte offset at which parsing stopped.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

}  // namespace cggan
