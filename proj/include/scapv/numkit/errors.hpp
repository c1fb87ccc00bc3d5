#pragma once

#include <stdexcept>
#include <string>

namespace scapv {

// Operand shapes do not fit the operation.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A NaN or Inf appeared in a result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scapv
