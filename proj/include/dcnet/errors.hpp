#pragma once

#include <stdexcept>
#include <string>

namespace dcnet {

/// Incompatible tensor shapes. The message names the offending axis or operand.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid model/experiment configuration (bad group count, level sets, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Misuse of the autograd machinery (double backward, detached loss, ...).
class AutogradError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or truncated file payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quality metric has no defined value for the given input.
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// NaN or Inf surfaced during a computation that must stay finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dcnet
