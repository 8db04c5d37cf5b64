#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rwevade {

// Bad input data: malformed files, inconsistent traces, unusable datasets.
// The CLI maps this family to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TraceParseError : public DataError {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ModelError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace rwevade
