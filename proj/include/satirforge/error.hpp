#pragma once

#include <stdexcept>
#include <string>

namespace satirforge {

/// Base class of every error raised by the library. The CLI maps these onto
/// exit codes; bindings map them onto ValueError / OSError.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedCounts : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class LabelOutOfRange : public Error {
 public:
  using Error::Error;
};

class TooManyCategories : public Error {
 public:
  using Error::Error;
};

class EmptyForeground : public Error {
 public:
  using Error::Error;
};

class EmptyEvaluation : public Error {
 public:
  using Error::Error;
};

class BadFractions : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace satirforge
