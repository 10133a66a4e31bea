#pragma once

#include <stdexcept>
#include <string>

namespace mat {

// Root of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A non-finite value was consumed or produced.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. backward() on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

// An attention mask left a query row with nothing to attend to.
class MaskingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during optimisation; message carries epoch and batch.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class CheckpointHeaderError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointCensusError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointTruncationError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace mat
