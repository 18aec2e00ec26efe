#pragma once

#include <stdexcept>
#include <string>

namespace cconn {

// Every failure raised by the library derives from Error. The CLI maps the
// concrete type to a process exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition on user-supplied parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Degenerate point sets, failed point location.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents; the message carries the line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Loss of rank, non-finite values, failed factorizations.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Generative model cannot produce the requested sample.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Missing files or failed writes.
class IoError : public Error {
 public:
  using Error::Error;
};

// 0 success, 2 usage/config, 3 data, 4 numerical.
int exit_code(const Error& e);

void warn(const std::string& message);

}  // namespace cconn
