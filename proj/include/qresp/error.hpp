#pragma once

#include <stdexcept>
#include <string>

namespace qresp {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few samples to resolve the requested number of Fourier modes.
class AliasingError : public Error {
 public:
  using Error::Error;
};

/// A precondition on the arguments does not hold.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A fiber map whose minimal derivative is numerically zero.
class DegenerateMapError : public Error {
 public:
  using Error::Error;
};

/// An index or composition leaves the sampled orbit window.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// A rate fit was requested on non-converged or insufficient data.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration; `field()` is a dotted path into the config.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qresp
