#pragma once

#include <stdexcept>
#include <string>

namespace c0ipm {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid material or numerical parameter.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// Degenerate geometry: inverted elements, non-unit normals, mismatched periodic faces.
class GeometryError : public Error {
public:
  using Error::Error;
};

/// Unsupported element shape or polynomial degree.
class CapabilityError : public Error {
public:
  using Error::Error;
};

/// Point outside the reference element.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Broken face table: non-manifold faces, bad rotation codes, mismatched quadrature.
class ConnectivityError : public Error {
public:
  using Error::Error;
};

/// Malformed mesh or config file. The message carries the line number or key.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Boundary specification does not classify the boundary consistently.
class SpecificationError : public Error {
public:
  using Error::Error;
};

/// A dof receives two incompatible constraints.
class ConstraintError : public Error {
public:
  using Error::Error;
};

/// Factorization or eigen-solve failure.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Input/output failure with path context.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace c0ipm
