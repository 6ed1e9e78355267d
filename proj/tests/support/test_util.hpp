#pragma once

#include <random>

#include "mto/types.hpp"

namespace mto::test {

inline Vec3 random_vec(std::mt19937& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

inline Vec3 random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n;
  Vec3 v(n(rng), n(rng), n(rng));
  return v / v.norm();
}

// Random symmetric shape operator tangent to the plane orthogonal to n.
inline Mat3 random_shape(std::mt19937& rng, const Vec3& n, double scale = 1.0) {
  Mat3 A = Mat3::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = std::uniform_real_distribution<double>(-scale, scale)(rng);
  const Mat3 P = Mat3::Identity() - n * n.transpose();
  return P * (A + A.transpose()) * 0.5 * P;
}

inline Vec3 tangent_part(const Vec3& v, const Vec3& n) { return v - n * n.dot(v); }

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0 ? std::abs(a - b) / s : 0.0;
}

inline double rel_err(const VecX& a, const VecX& b) {
  const double s = std::max(a.norm(), b.norm());
  return s > 0 ? (a - b).norm() / s : 0.0;
}

}  // namespace mto::test
