#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace porkcast {

/// Input data does not satisfy a contract (bad rows, degenerate series, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed CSV input; `line` is 1-based and counts the header.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class FetchError : public std::runtime_error {
public:
    enum class Kind { Network, Timeout, HttpStatus, Decode, Missing };

    FetchError(Kind kind, const std::string& what, int status = 0)
        : std::runtime_error(what), kind_(kind), status_(status) {}
    Kind kind() const { return kind_; }
    /// HTTP status for Kind::HttpStatus and HTTP-originated Kind::Missing, 0 otherwise.
    int status() const { return status_; }

private:
    Kind kind_;
    int status_;
};

/// A numerical routine could not produce a usable model.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace porkcast
