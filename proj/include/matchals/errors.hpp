#pragma once

#include <stdexcept>
#include <string>

namespace matchals {

/// Input file could not be parsed; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, long line)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}

    long line() const noexcept { return line_; }

private:
    long line_;
};

/// Every feature of a problem was pruned away (or fewer than two images remain).
class EmptyProblemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during iterative computation.
/// iteration() is the 1-based iteration at which divergence was detected,
/// or -1 when not applicable.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg, long iteration = -1)
        : std::runtime_error(msg), iteration_(iteration) {}

    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// The requested number of leading nonnegative eigenvalues does not exist.
class DegenerateSpectrumError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace matchals
