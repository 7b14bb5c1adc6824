#pragma once

#include <stdexcept>
#include <string>

namespace morphnas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the operation's domain (bad index, bad probability, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A serialized document (checkpoint, IDX file, JSON) is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A cache or snapshot no longer matches the structure it was taken from.
class StaleStateError : public Error {
 public:
  using Error::Error;
};

}  // namespace morphnas
