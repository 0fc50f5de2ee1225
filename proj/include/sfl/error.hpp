#pragma once

#include <stdexcept>
#include <string>

namespace sfl {

// Base of every error raised by the library. Callers that only care about
// "the computation could not proceed" catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class NotOnManifold : public Error {
public:
    using Error::Error;
};

class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

// Config text could not be parsed; carries a 1-based source position.
class ParseError : public Error {
public:
    ParseError(std::string source, int line, int column, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return column_; }

private:
    int line_;
    int column_;
};

}  // namespace sfl
