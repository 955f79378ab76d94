#pragma once

#include <stdexcept>
#include <string>

namespace hdre {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad header, inconsistent fields).
class FormatError : public Error {
public:
    using Error::Error;
};

/// File ended before the declared payload was complete.
class TruncationError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Valid file, but a feature this library does not handle.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Caller violated an operation precondition.
class InputError : public Error {
public:
    using Error::Error;
};

/// Inconsistent architecture or run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Stored model data does not match what the code expects.
class IntegrityError : public Error {
public:
    using Error::Error;
};

} // namespace hdre
