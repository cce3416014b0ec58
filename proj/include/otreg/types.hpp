#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace otreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error taxonomy shared across the library. Everything derives from
// std::runtime_error / std::invalid_argument so callers can catch broadly.
struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TooLarge : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonUniformMarginals : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingGroundTruth : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateLabels : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InsufficientIterations : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidRho : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SingularSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace otreg
