#pragma once

#include <stdexcept>
#include <string>

namespace mufasa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch, double observe, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Rank-one inverse update whose denominator fell below the safety threshold.
class NearSingularUpdate : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization failed.
class NotSpd : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg, long line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    long line() const noexcept { return line_; }

private:
    long line_;
};

/// Training loss blew past the divergence guard.
class Divergence : public Error {
public:
    using Error::Error;
};

/// Requested configuration is valid in principle but not supported by this path.
class Unsupported : public Error {
public:
    using Error::Error;
};

}  // namespace mufasa
