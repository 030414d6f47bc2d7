#pragma once

#include <stdexcept>
#include <string>

namespace nrvc {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySelectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Loss went NaN/Inf while fitting; carries the epoch (and slice, when known).
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, int epoch, int slice = -1)
      : std::runtime_error(msg), epoch(epoch), slice(slice) {}
  int epoch;
  int slice;
};

struct CorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuantOverflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nrvc
