#pragma once

#include <stdexcept>
#include <string>

namespace ckpl {

// Base of every error raised by the library. Subclasses name the contract that
// was violated so callers (and the CLI) can map them to diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A scalar parameter outside its admissible range (tau <= 0, N = 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Class or entry index outside [0, C).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Unknown key (class name, template id, sample id, parameter name).
class LookupError : public Error {
 public:
  using Error::Error;
};

// A function under evaluation produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

// A class with no training samples was asked for its centroid.
class MissingCentroidError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ckpl
