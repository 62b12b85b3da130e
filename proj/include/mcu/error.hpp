#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mcu {

// Base for every error the library raises. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Checkpoint-specific failures, kept distinct so callers can tell them apart.
class MagicMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class HashMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFileError : public IoError {
 public:
  using IoError::IoError;
};

// Raised when a training run fails its accuracy floor; carries the per-epoch accuracy.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::vector<double> accuracy_curve = {})
      : Error(what), accuracy_curve_(std::move(accuracy_curve)) {}
  const std::vector<double>& accuracy_curve() const { return accuracy_curve_; }

 private:
  std::vector<double> accuracy_curve_;
};

}  // namespace mcu
