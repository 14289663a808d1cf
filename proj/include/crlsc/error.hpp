#pragma once

#include <stdexcept>
#include <string>

namespace crlsc {

// Precondition / argument violations (bad shapes, non-finite input, bad ranges).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed persisted data (bad magic, version, truncation).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class NetError : public std::runtime_error {
public:
    explicit NetError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced non-finite values; carries where it happened.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace crlsc
