#pragma once

#include <stdexcept>
#include <string>

namespace chip {

/// Thrown when an argument violates an operation's precondition.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when a numerical routine fails (non-convergence, log of a
/// non-positive value, and so on).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the offending line number (1-based, 0 when
/// the error is not tied to a line).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace chip
