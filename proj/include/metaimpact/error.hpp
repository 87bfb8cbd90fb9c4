#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metaimpact {

// Base for every error the library throws on bad input or configuration.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration (flags, scenario fields, thresholds).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that violates a contract (duplicate ids, empty tape, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; `line()` is 1-based and 0 when not applicable.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace metaimpact
