// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace chess {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value (ratio outside (0,1], zero capacity, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// The page pool has no free slot left.
class OutOfPagesError : public Error {
public:
    using Error::Error;
};

/// Logical or physical index outside the valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// An operation was called on state that violates its precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Pages were finalized out of positional order.
class OrderingError : public Error {
public:
    using Error::Error;
};

/// Vector or matrix dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// The sequence holds no tokens to build an anchor from.
class EmptyContextError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (e.g. a distribution that does not sum to one).
class InputError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

/// A requested count exceeds the number of available items.
class BoundError : public Error {
public:
    using Error::Error;
};

/// Filesystem or serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace chess
