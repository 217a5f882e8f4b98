#pragma once

#include <stdexcept>
#include <string>

namespace porogen {

/// Base class for all porogen errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid value passed to an operation (out-of-range channel, bad shape, ...).
struct DomainError : Error {
    using Error::Error;
};

/// Invalid or inconsistent configuration. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Bad input data: corpus, image files, well logs. CLI exit code 3.
struct DataError : Error {
    using Error::Error;
};

/// Malformed file content (CSV rows, manifest JSON). Treated as data. Exit code 3.
struct ParseError : DataError {
    using DataError::DataError;
};

/// Unreadable, corrupt or mismatched checkpoint. CLI exit code 4.
struct CheckpointError : Error {
    using Error::Error;
};

} // namespace porogen
