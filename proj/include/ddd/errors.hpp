// Exception types shared by the library.
#pragma once

#include <stdexcept>
#include <string>

namespace ddd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid arguments (bad schedule factor, empty box, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Geometry failures. The subclasses name which predicate gave up.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Sample points lie in a hyperplane, or two points coincide.
class DegenerateInput : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class DegenerateSimplex : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class DegenerateFacet : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// The simplex walk exceeded its flip budget.
class WalkDegenerate : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Static dataset ingestion errors.
class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyAfterDedup : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateInterval : public DataError {
 public:
  using DataError::DataError;
};

/// Trials passed to aggregation disagree on the sample-count schedule.
class ScheduleMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace ddd
