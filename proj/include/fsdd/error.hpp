#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fsdd {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input value: a broken fixed-sum constraint, out-of-range index,
/// mismatched shapes or bad configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Filesystem failures; the message always names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsdd
