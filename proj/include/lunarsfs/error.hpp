#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lunarsfs {

// Base class for everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: unreadable files, malformed headers, mismatched grids.
class InputError : public Error {
 public:
  using Error::Error;
};

// Parse failure carrying the 1-based line number of the offending token.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line), message_(what) {}

  std::size_t line() const { return line_; }
  // what() without the line prefix.
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

// The optimizer or a numerical routine produced a non-finite or undefined result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lunarsfs
