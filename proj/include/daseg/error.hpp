#pragma once

#include <stdexcept>
#include <string>

namespace daseg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or volume dimensions that cannot be processed.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Missing files, malformed containers, unknown label codes.
class DataError : public Error {
public:
    using Error::Error;
};

/// Raised when a target-domain label is read while a TargetLabelLock is held.
class TargetLabelAccessError : public Error {
public:
    using Error::Error;
};

/// Statistics requested on degenerate input (e.g. zero variance).
class StatisticsError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace daseg
