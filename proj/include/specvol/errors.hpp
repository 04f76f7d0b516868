#pragma once

#include <stdexcept>
#include <string>

namespace specvol {

/// Invalid argument to a library call (bad index, length mismatch, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity left its mathematical domain (negative variance, singular
/// matrix, imaginary square root, ...).
class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent scenario / CLI configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace specvol
