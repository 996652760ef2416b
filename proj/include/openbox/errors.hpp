#pragma once

#include <stdexcept>
#include <string>

namespace openbox {

/// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape mismatch between matrices, vectors, layers or constraints.
struct DimensionError : Error {
    using Error::Error;
};

/// Numerically invalid input (NaN/Inf) or a value outside its domain.
struct DomainError : Error {
    using Error::Error;
};

/// Malformed file contents; message carries file name and position context.
struct ParseError : Error {
    using Error::Error;
};

/// A saved interpretation no longer matches the network it is applied to.
struct StaleModelError : Error {
    using Error::Error;
};

/// Training diverged or was fed unusable data (bad labels, NaN loss).
struct TrainingError : Error {
    using Error::Error;
};

/// Dataset-level problems: empty classes, truncated files, count mismatches.
struct DataError : Error {
    using Error::Error;
};

} // namespace openbox
