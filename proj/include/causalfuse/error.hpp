#pragma once

#include <stdexcept>
#include <string>

namespace causalfuse {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or sizes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedKernelError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Requested more items than are available (clusters, dictionary entries).
class CountError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents or configuration documents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace causalfuse
