#pragma once

#include <stdexcept>
#include <string>

namespace tsact {

// Error categories. The CLI maps them onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or out-of-domain scalar input.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter, activation parameter or size.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed, missing or inconsistent dataset content.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced during a forward or backward pass.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long node = -1)
      : Error(what), node_(node) {}
  long node() const noexcept { return node_; }

 private:
  long node_;
};

// A caller broke an operation's precondition (wrong layer type, gaps in a
// matrix, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsact
