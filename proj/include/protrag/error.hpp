#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace protrag {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number of the offending line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A backend call that still failed after its retry budget was spent.
class BackendError : public Error {
public:
    BackendError(std::size_t attempts, const std::string& message)
        : Error(message + " (after " + std::to_string(attempts) + " attempt" +
                (attempts == 1 ? "" : "s") + ")"),
          attempts_(attempts) {}

    std::size_t attempts() const noexcept { return attempts_; }

private:
    std::size_t attempts_;
};

}  // namespace protrag
