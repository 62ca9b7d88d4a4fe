#pragma once

#include <stdexcept>
#include <string>

namespace koopgrip {

/// Base for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed, mismatched or insufficient input data.
class InputError : public Error {
public:
    using Error::Error;
};

/// Parameter or configuration outside its valid domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Degenerate numerics: zero variance, singular systems, undefined metrics.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace koopgrip
