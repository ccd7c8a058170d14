#pragma once

#include <stdexcept>
#include <string>

namespace chidt {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input, violated invariant, or rejected configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace chidt
