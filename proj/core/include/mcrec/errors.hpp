#pragma once

#include <stdexcept>
#include <string>

namespace mcrec {

// Base class for all library errors. Subclasses map onto process exit
// codes in the CLI: input/contract problems -> 2, checkpoint -> 3,
// numerical breakdown -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A numeric argument left the valid domain of an operation
// (NaN coordinates, point outside the curvature domain, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

// Malformed text input. Carries the source line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, long line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what) {}
  explicit ParseError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// Unreadable, truncated or incompatible checkpoint file.
class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& what) : Error(what) {}
};

// Finite-precision breakdown: degenerate denominators, NaN gradients.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

}  // namespace mcrec
