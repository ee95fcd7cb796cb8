#pragma once

#include <stdexcept>
#include <string>

namespace mlsmc {

/// Level or index outside the range a model or record supports.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A density or potential evaluated to something non-finite.
class NumericalDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// All weights vanished (numerically) during selection or normalization.
class DegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition (missing summaries, bad plan, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Requested work exceeds a configured hard cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Malformed or inconsistent configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mlsmc
