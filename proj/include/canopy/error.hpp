#pragma once

#include <stdexcept>
#include <string>

namespace canopy {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid parameter value (non-positive resolution, k out of range, ...).
class ParamError : public Error {
public:
  using Error::Error;
};

/// Operation requires a non-empty input.
class EmptyInputError : public Error {
public:
  using Error::Error;
};

/// File could not be parsed; message names the file and line/byte offset.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Filesystem failure; message names the path.
class IoError : public Error {
public:
  using Error::Error;
};

/// Model fitting failed (RANSAC could not produce a plane).
class FitError : public Error {
public:
  using Error::Error;
};

/// Clustering failure (eigensolver breakdown, invalid cluster state).
class SegmentationError : public Error {
public:
  using Error::Error;
};

/// Mesh is not closed / not consistently oriented.
class TopologyError : public Error {
public:
  using Error::Error;
};

/// Point set too degenerate for hull / tetrahedralization.
class DegenerateGeometryError : public Error {
public:
  using Error::Error;
};

/// Input data violates a documented contract (duplicate labels, size mismatch).
class ValidationError : public Error {
public:
  using Error::Error;
};

}  // namespace canopy
