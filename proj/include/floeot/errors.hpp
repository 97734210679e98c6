#pragma once

#include <stdexcept>
#include <string>

namespace floeot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// raster I/O
class FormatError : public Error {
 public:
  using Error::Error;
};
class TruncationError : public Error {
 public:
  using Error::Error;
};
class MetadataError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied parameter violates an operation's precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot be processed (e.g. an all-zero image).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Problem too large for a dense or exact code path.
class ScaleError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Sinkhorn scaling vectors left the representable range.
class StabilizationError : public Error {
 public:
  using Error::Error;
};

/// A derived quantity was requested from a solve that did not converge.
class StalenessError : public Error {
 public:
  using Error::Error;
};

/// Marginals passed to the exact solver do not carry equal mass.
class BalanceError : public Error {
 public:
  using Error::Error;
};

}  // namespace floeot
