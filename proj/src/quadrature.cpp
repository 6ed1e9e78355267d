#include "mto/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mto {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) r.x[n / 2] = 0.0;
  return r;
}

namespace {

void lagrange2(double t, double* v, double* d) {
  v[0] = 0.5 * t * (t - 1.0);
  v[1] = 1.0 - t * t;
  v[2] = 0.5 * t * (t + 1.0);
  d[0] = t - 0.5;
  d[1] = -2.0 * t;
  d[2] = t + 0.5;
}

}  // namespace

ShapeQ2 shape_q2(double xi, double eta) {
  double a[3], da[3], b[3], db[3];
  lagrange2(xi, a, da);
  lagrange2(eta, b, db);
  ShapeQ2 s;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      s.N[3 * j + i] = a[i] * b[j];
      s.dxi[3 * j + i] = da[i] * b[j];
      s.deta[3 * j + i] = a[i] * db[j];
    }
  return s;
}

ShapeQ1 shape_q1(double xi, double eta) {
  const double a[2] = {0.5 * (1.0 - xi), 0.5 * (1.0 + xi)};
  const double b[2] = {0.5 * (1.0 - eta), 0.5 * (1.0 + eta)};
  const double da[2] = {-0.5, 0.5};
  ShapeQ1 s;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      s.N[2 * j + i] = a[i] * b[j];
      s.dxi[2 * j + i] = da[i] * b[j];
      s.deta[2 * j + i] = a[i] * da[j];
    }
  return s;
}

std::array<double, 2> side_point(int side, double t) {
  switch (side) {
    case 0: return {t, -1.0};
    case 1: return {1.0, t};
    case 2: return {t, 1.0};
    default: return {-1.0, t};
  }
}

}  // namespace mto
