#pragma once

#include <stdexcept>
#include <string>

namespace qg {

/// Base of all library errors. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A spectral or control hypothesis does not hold on the checked range (exit code 3).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside a solver (exit code 1).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace qg
