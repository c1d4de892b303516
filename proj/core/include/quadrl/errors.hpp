#pragma once

#include <stdexcept>
#include <string>

namespace quadrl {

/// Input has the wrong shape for the operation (vector length, matrix size, layer layout).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The simulation or an optimizer produced non-finite or out-of-range values.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A junction pair whose perturbation is too small to estimate a gradient from.
class DegeneratePairError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every junction pair of an iteration was rejected, so no policy step can be taken.
class NoUpdateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration file, key or value. The message names the offending key or path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace quadrl
