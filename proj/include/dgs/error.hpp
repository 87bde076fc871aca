#pragma once

#include <stdexcept>
#include <string>

namespace dgs {

// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced or consumed where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration values or usage.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Precondition of an operation not met (e.g. scoring with an untrained net).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dgs
