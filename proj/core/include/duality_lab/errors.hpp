#pragma once

#include <stdexcept>
#include <string>

namespace dlab {

/// Base of every exception thrown by the library. Carries the name of the
/// module that raised it so that runners can report "module: message".
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message);

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

/// Arguments or configuration that violate a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A market or utility description that is well formed but mathematically
/// unusable (non-martingale increments, nonpositive density, arbitrage).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine that could not produce a certified answer.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace dlab
