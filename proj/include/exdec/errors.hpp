// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace exdec {

/// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed data that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A configuration is internally inconsistent or inconsistent with the model.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Least-squares fit requested over fewer than two distinct abscissae.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable trace file, or a failed trace write.
class TraceError : public Error {
 public:
  using Error::Error;
};

/// A replay session was asked for more steps than the trace holds.
class EndOfTrace : public TraceError {
 public:
  using TraceError::TraceError;
};

/// Dataset or report file content that cannot be used.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace exdec
