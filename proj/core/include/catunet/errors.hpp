#pragma once

#include <stdexcept>
#include <string>

namespace catunet {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on arguments or configuration was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes are incompatible with the requested operation.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Filesystem or decoding failure; the message names the path.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A checkpoint could not be decoded (bad magic, version, truncation).
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// An update was requested for a parameter that holds no gradient.
class MissingGradientError : public ValidationError {
 public:
  explicit MissingGradientError(const std::string& parameter)
      : ValidationError("parameter '" + parameter + "' has no gradient"), parameter_(parameter) {}

  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

/// Training stopped because the loss became non-finite.
class TrainingAborted : public Error {
 public:
  TrainingAborted(int epoch, int batch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace catunet
