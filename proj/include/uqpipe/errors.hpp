#pragma once

#include <stdexcept>
#include <string>

namespace uqpipe {

/// Base class for every error raised by the library. The exit code is the
/// one the CLI reports when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Invalid configuration or parameters (unknown family, bad bounds, n < 2, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

/// Problems with the data itself: out-of-domain values, degenerate samples,
/// dimension mismatches, malformed CSV.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what, 3) {}
};

/// Numerical failures: factorization after maximal jitter, all fit starts failing.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, 4) {}
};

}  // namespace uqpipe
