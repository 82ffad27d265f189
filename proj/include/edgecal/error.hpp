#pragma once

#include <stdexcept>
#include <string>

namespace edgecal {

// Violated precondition or invariant of a public operation.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible matrix/vector shapes; message names both shapes.
struct DimensionError : ContractError {
  explicit DimensionError(const std::string& msg) : ContractError(msg) {}
};

// Malformed input file; carries the offending line number when known.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, long line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"),
        line_number(line) {}
  long line_number;
};

// Optimization diverged (non-finite loss); carries the epoch index.
struct TrainingError : std::runtime_error {
  TrainingError(const std::string& msg, long epoch)
      : std::runtime_error(msg + " (epoch " + std::to_string(epoch) + ")"),
        epoch_index(epoch) {}
  long epoch_index;
};

}  // namespace edgecal
