#pragma once

#include <stdexcept>
#include <string>

namespace elicit {

// Base of every error raised by the library. The CLI maps these onto exit
// codes and the service maps them onto HTTP status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Misuse of an API, e.g. reading values from an infeasible solve.
class UsageError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

// Formulation would exceed the configured size budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// The updated uncertainty set is empty.
class InfeasibleUncertainty : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class Conflict : public Error {
 public:
  using Error::Error;
};

class Gone : public Error {
 public:
  using Error::Error;
};

}  // namespace elicit
