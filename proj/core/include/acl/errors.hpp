#pragma once

#include <stdexcept>
#include <string>

namespace acl {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes (the message names both shapes).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A call violated an operation's stated contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A class label fell outside [0, C).
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Architecture growth past the configured task capacity.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent dataset content.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content (bad magic, truncation, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Replay budget not representable (m not divisible by C).
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given inputs (e.g. BWT at T=1).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace acl
