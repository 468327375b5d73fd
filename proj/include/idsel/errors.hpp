#pragma once

#include <stdexcept>
#include <string>

namespace idsel {

// Base of every error the library raises. Callers that only need a message
// can catch this; the CLI maps ValidationError to exit code 2 and all other
// errors to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that violates a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed file content.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A mathematical operation was called outside its domain (zero norm, empty
// token list, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Operation not allowed in the current state (session complete, stale head).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace idsel
