#pragma once

#include <stdexcept>
#include <string>

namespace nkflex {

/// Base of every failure raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad scenario / parameters; maps to CLI exit code 3.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its domain (under-resolved kernel,
/// non-SPD node, amplitude above the corrugation table, ...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A runtime-checked estimate of the scheme did not hold; maps to exit code 2.
class AssertionFailure : public Error {
public:
    using Error::Error;
};

/// An iterative solve did not converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace nkflex
