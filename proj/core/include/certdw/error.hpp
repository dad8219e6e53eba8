#pragma once

#include <stdexcept>
#include <string>

namespace certdw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the operation's domain (bad shape, non-finite
/// value, empty input, out-of-range probability).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A trigger would have zero magnitude where a positive one is required.
class DegenerateTriggerError : public Error {
 public:
  using Error::Error;
};

/// No correctly predicted pool sample exists for some class.
class RepresentativeUnavailableError : public Error {
 public:
  RepresentativeUnavailableError(std::size_t label, const std::string& what)
      : Error(what), label_(label) {}
  std::size_t label() const noexcept { return label_; }

 private:
  std::size_t label_;
};

/// The calibration set is too small for the requested significance level.
class InsufficientCalibrationError : public Error {
 public:
  using Error::Error;
};

/// The classifier kind does not support the requested operation.
class UnsupportedOperationError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingFailureError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing an artifact failed, or its contents are malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace certdw
