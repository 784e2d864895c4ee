#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmsp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument or configuration field is out of its valid range.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// The noise-adaptive weight is undefined because the residual and the
/// kernel-variance term are both zero.
class ExactFitError : public Error {
 public:
  using Error::Error;
};

/// The denoiser's noise level does not match the prior configuration.
class SigmaMismatchError : public Error {
 public:
  SigmaMismatchError(const std::string& what, double expected, double actual)
      : Error(what), expected_(expected), actual_(actual) {}
  double expected() const { return expected_; }
  double actual() const { return actual_; }

 private:
  double expected_;
  double actual_;
};

/// CNN weights are internally inconsistent or do not fit the image.
class LayerError : public Error {
 public:
  LayerError(const std::string& what, std::size_t layer)
      : Error(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

/// Failure to read or write a file or byte stream.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Weight stream parse failures, one subclass per failure kind.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};
class MagicMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};
class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};
class LayerShapeError : public FormatError {
 public:
  LayerShapeError(const std::string& what, std::size_t layer)
      : FormatError(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

}  // namespace dmsp
