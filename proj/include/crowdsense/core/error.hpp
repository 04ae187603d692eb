#pragma once

#include <stdexcept>
#include <string>

namespace crowdsense {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input text could not be understood at all (file-level failure).
class ParseError : public Error {
public:
  using Error::Error;
};

/// A precondition on an argument was violated.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// The operation conflicts with state already present (duplicate commit,
/// conflicting re-registration).
class ConflictError : public Error {
public:
  using Error::Error;
};

/// A named entity (theme, area, AP, building) does not exist.
class NotFoundError : public Error {
public:
  using Error::Error;
};

/// Not enough history to run the requested model.
class InsufficientDataError : public Error {
public:
  using Error::Error;
};

} // namespace crowdsense
