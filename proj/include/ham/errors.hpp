#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ham {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input outside an operation's mathematical domain (empty softmax, zero
// probability under a positive target, non-scalar loss, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared where the model requires finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Dependency structure with zero or several roots.
class StructureError : public Error {
 public:
  using Error::Error;
};

class CycleError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ham
