#pragma once

#include <stdexcept>
#include <string>

namespace qdc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A physical parameter lies outside its domain (negative temperature, x > 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A matrix or coupling configuration is degenerate (zero denominators,
/// reducible generator, non-simple eigenvalue).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Root bracketing found no sign change, i.e. no stall bias in the interval.
class NoStallError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with inputs that violate its contract.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Configuration text is malformed or incomplete.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : Error(format(key, line, what)), key_(key), line_(line) {}

  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string msg = "config";
    if (line > 0) msg += ":" + std::to_string(line);
    if (!key.empty()) msg += ": key '" + key + "'";
    return msg + ": " + what;
  }

  std::string key_;
  int line_;
};

}  // namespace qdc
