#pragma once

#include <stdexcept>
#include <string>

namespace fpgnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An index (column, node, edge endpoint) lies outside its valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// A scalar argument lies outside its documented domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A computation produced non-finite values or is numerically ill-posed.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Misuse of the reverse-mode tape (non-scalar loss, repeated backward, cycles).
class AutogradError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent dataset / model files.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace fpgnn
