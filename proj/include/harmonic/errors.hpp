#pragma once

#include <stdexcept>
#include <string>

namespace harmonic {

// Base of every error thrown by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor extents that do not fit an operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Argument outside its documented domain (negative stride, K = 0, lr <= 0, ...).
class ValueError : public Error {
public:
    using Error::Error;
};

// Malformed IDX / CIFAR / checkpoint / config content.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// NaN or Inf produced by a forward or backward pass.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace harmonic
