#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vsplat {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or missing input file. Carries the file and (when known) the 1-based line.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : Error(format(file, line, what)), file_(std::move(file)), line_(line) {}
    ParseError(std::string file, const std::string& what) : ParseError(std::move(file), 0, what) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& file, std::size_t line, const std::string& what) {
        std::string s = file;
        if (line > 0) s += ":" + std::to_string(line);
        return s + ": " + what;
    }

    std::string file_;
    std::size_t line_ = 0;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Violated internal invariant (shape mismatch, non-invertible covariance, ...).
class InternalError : public Error {
public:
    using Error::Error;
};

/// Bad command line or configuration; maps to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

} // namespace vsplat
