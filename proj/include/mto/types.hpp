#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mto {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: unknown case, out-of-range parameter, malformed config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Newton divergence, singular factorization.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Offset surface folds over itself (det of map Jacobian <= 0).
class GeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace mto
