#pragma once

#include <vector>

#include "mto/geometry.hpp"
#include "mto/linalg.hpp"
#include "mto/mesh.hpp"

namespace mto {

struct FilterParams {
  double r_f = 1.0 / 50.0;  // pattern filter radius (length)
  double r_m = 2.0 / 25.0;  // manifold filter radius (length)
  double A_d = 0.0;         // offset amplitude
  double beta = 1.0;
  double xi = 0.5;
  void validate() const;
};

struct MaterialParams {
  double alpha_s = 1e4;
  double alpha_f = 0.0;
  double q = 1.0;
};

struct DesignState {
  VecX gamma;    // Q1 nodes (fixed nodes hold 1)
  VecX d_m;      // Q2 nodes
  VecX gamma_f;  // Q1
  VecX d_f;      // Q2
  std::vector<double> gamma_p;   // per volume quadrature point
  std::vector<double> dgamma_p;  // d gamma_p / d gamma_f, zero on channel elements
};

double project(double gamma_f, double beta, double xi);
double projection_derivative(double gamma_f, double beta, double xi);
double impermeability(double gamma_p, const MaterialParams& mp);
double impermeability_derivative(double gamma_p, const MaterialParams& mp);

// Q1 nodes carrying pattern design variables (touching a design element).
std::vector<int> design_gamma_nodes(const BaseManifoldMesh& mesh);

// Helmholtz filter on the quadratic space of Sigma: (r^2 K + M) d_f = M A_d (d_m - 1/2).
class ManifoldFilter {
 public:
  ManifoldFilter(const BaseManifoldMesh& mesh, double r_m);
  VecX apply(const VecX& d_m, double A_d) const;
  VecX solve(const VecX& rhs) const { return solver_.solve(rhs); }
  const SpMat& matrix() const { return K_; }
  const SpMat& mass() const { return M_; }
  double base_area() const { return area_; }

 private:
  SpMat K_, M_;
  SymmetricSolver solver_;
  double area_ = 0.0;
};

// Measure-weighted filter on the linear space, coupled to Gamma through P and M.
class PatternFilter {
 public:
  PatternFilter(const BaseManifoldMesh& mesh, const GeometricFactors& gf, double r_f);
  VecX apply(const VecX& gamma) const;
  VecX solve(const VecX& rhs) const { return solver_.solve(rhs); }
  const SpMat& matrix() const { return K_; }
  double min_pivot() const { return solver_.min_pivot(); }

 private:
  const BaseManifoldMesh* mesh_;
  const GeometricFactors* gf_;
  SpMat K_;
  SymmetricSolver solver_;
};

VecX filter_manifold(const VecX& d_m, const BaseManifoldMesh& mesh, double r_m, double A_d);
VecX filter_pattern(const VecX& gamma, const VecX& d_f, const BaseManifoldMesh& mesh, double r_f,
                    double eps0 = kDefaultEps0);

// gamma_p and its derivative at every volume quadrature point.
void project_density(const BaseManifoldMesh& mesh, const VecX& gamma_f, double beta, double xi,
                     std::vector<double>& gamma_p, std::vector<double>& dgamma_p);

}  // namespace mto
