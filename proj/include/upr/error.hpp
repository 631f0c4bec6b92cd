#pragma once

#include <stdexcept>
#include <string>

namespace upr {

/// Base of every error raised by the toolkit. The CLI maps subclasses onto
/// exit codes: DataError -> 2, TransportError -> 3.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad input data or arguments (malformed files, duplicate ids, bad params).
class DataError : public Error {
  public:
    using Error::Error;
};

class InvalidArgument : public DataError {
  public:
    using DataError::DataError;
};

class NotFound : public DataError {
  public:
    using DataError::DataError;
};

class ParseError : public DataError {
  public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : DataError(source + ":" + std::to_string(line) + ": " + what), m_line(line)
    {}

    [[nodiscard]] std::size_t line() const { return m_line; }

  private:
    std::size_t m_line;
};

/// The scoring backend could not be reached or answered with garbage.
class TransportError : public Error {
  public:
    using Error::Error;
};

}  // namespace upr
