#pragma once

#include <stdexcept>
#include <string>

namespace mflab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};

struct RangeError : Error {
  using Error::Error;
};

struct ResourceError : Error {
  using Error::Error;
};

struct CutLocusError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Raised when a state coordinate becomes non-finite or exceeds the
/// divergence threshold. `index` is the offending particle (or -1).
struct DivergenceError : Error {
  DivergenceError(double t, int idx)
      : Error("divergence at t=" + std::to_string(t) +
              (idx >= 0 ? " (particle " + std::to_string(idx) + ")" : "")),
        time(t),
        index(idx) {}
  double time;
  int index;
};

}  // namespace mflab
