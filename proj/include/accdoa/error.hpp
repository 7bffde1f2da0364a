#pragma once

#include <stdexcept>
#include <string>

namespace accdoa {

/// Base class for every error the toolkit throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class DegenerateDirection : public Error {
public:
    using Error::Error;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class LengthError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ContractViolation : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

} // namespace accdoa
