#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kmp {

// Base of every error thrown by the library. Callers that only want a
// one-line diagnostic can catch this and print what().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised when an op produces NaN/Inf while finite checking is enabled.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::string op, const std::string& detail)
      : Error("non-finite value produced by op '" + op + "'" +
              (detail.empty() ? std::string() : ": " + detail)),
        op_(std::move(op)) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace kmp
