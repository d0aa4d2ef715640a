#pragma once

#include <stdexcept>
#include <string>

namespace blowup {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation requested outside the declared range of a function.
class RangeError : public Error {
public:
    RangeError(const std::string& axis, double value, const std::string& detail)
        : Error("range error on axis '" + axis + "' (value " + std::to_string(value) + "): " + detail),
          axis_(axis) {}
    const std::string& axis() const noexcept { return axis_; }

private:
    std::string axis_;
};

/// A caller-side precondition does not hold (bad grid, decreasing nonlinearity, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A hard invariant of a pipeline was breached (maximum principle, ordering, ...).
class InvariantBreach : public Error {
public:
    using Error::Error;
};

/// Malformed experiment configuration; the message carries the key path.
class ConfigError : public Error {
public:
    ConfigError(const std::string& key_path, const std::string& detail)
        : Error(key_path + ": " + detail), key_path_(key_path) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

} // namespace blowup
