#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace causalsem {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/matrix shape disagreement.
struct DimensionError : Error {
  using Error::Error;
};

/// A graph that must be acyclic contains a cycle. Carries a printable witness.
struct AcyclicityError : Error {
  explicit AcyclicityError(const std::string& msg, std::vector<int> cycle = {})
      : Error(msg), cycle(std::move(cycle)) {}
  std::vector<int> cycle;
};

/// Non-finite values, singular solves, diverged optimization.
struct NumericError : Error {
  using Error::Error;
};

/// Invalid configuration (bad field value, unknown key, inconsistent section).
struct ConfigError : Error {
  using Error::Error;
};

/// Filesystem and (de)serialization failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace causalsem
