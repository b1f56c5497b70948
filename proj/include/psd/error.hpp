#pragma once

#include <stdexcept>
#include <string>

namespace psd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// A zero-area region was used where a positive area is required.
class DegenerateRegion : public Error {
 public:
  using Error::Error;
};

// Released budget does not compose to the advertised epsilon.
class AuditFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace psd
