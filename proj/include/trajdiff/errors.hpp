#pragma once

#include <stdexcept>
#include <string>

namespace trajdiff {

// Error taxonomy mirrors the CLI exit codes: usage -> 1, data -> 2, numeric -> 3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : DataError {
  ParseError(const std::string& file, long line, const std::string& msg)
      : DataError(file + ":" + std::to_string(line) + ": " + msg), line_number(line) {}
  long line_number;
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace trajdiff
