#pragma once

#include <stdexcept>
#include <string>

namespace xrecon {

// Every library failure derives from Error so the CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes incompatible with an op. The message names the op and the dims.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a forward or backward computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backward twice or Adam without gradients.
class UsageError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The point lies at or behind the X-ray source.
class ProjectionError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// A request exceeds a configured solver limit (e.g. exact EMD size).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class DegeneratePhantomError : public Error {
 public:
  using Error::Error;
};

/// A finite-difference check could not be carried out (non-deterministic loss).
class CheckInvalidError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace xrecon
