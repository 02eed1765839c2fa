#pragma once

#include <stdexcept>
#include <string>

namespace stbn {

/// Tensor/block shape or argument mismatch. The message names the offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Beam geometry too close to singular (theta near 0 collapses all beams to the vertical).
class DegenerateGeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value (bad hyper-parameter combination, empty split, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Not enough valid past DVL epochs to form a history window.
class InsufficientHistoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss). Message names the epoch.
class TrainingFailureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric is undefined for the given inputs (e.g. zero truth variance for R2/VAF).
class MetricUndefinedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two prediction lists do not cover the same epochs.
class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written, or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint and manifest/config disagree on shapes or hyper-parameters.
class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stbn
