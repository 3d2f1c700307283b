#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace structhinf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed basis-function source text. `position()` is a 0-based offset.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Input that violates a structural or dimensional contract.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Failure of a numerical kernel (eigen-solve, singular resolvent, stagnation).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace structhinf
