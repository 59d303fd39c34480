#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ate {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised on malformed inputs (XML, vector files, CSV, JSON).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised on contract violations (shape mismatches, invalid arguments).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when optimization produces non-finite losses.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ate
