#pragma once

#include <stdexcept>
#include <string>

namespace tensoria {

// Shape or index mismatch between arguments.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Rank tuple not admissible for the requested format.
struct RankError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or unreadable input files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Divergence, singular systems and similar breakdowns.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tensoria
