#include "mto/fields.hpp"

#include <cmath>

namespace mto {

void FilterParams::validate() const {
  if (!(r_f > 0.0)) throw ConfigError("filter.r_f must be positive");
  if (!(r_m > 0.0)) throw ConfigError("filter.r_m must be positive");
  if (!(A_d >= 0.0)) throw ConfigError("filter.A_d must be >= 0");
  if (!(beta >= 1.0)) throw ConfigError("filter.beta must be >= 1");
  if (!(xi > 0.0 && xi < 1.0)) throw ConfigError("filter.xi must lie in (0,1)");
}

double project(double gf, double beta, double xi) {
  const double a = std::tanh(beta * xi);
  return (a + std::tanh(beta * (gf - xi))) / (a + std::tanh(beta * (1.0 - xi)));
}

double projection_derivative(double gf, double beta, double xi) {
  const double c = 1.0 / std::cosh(beta * (gf - xi));
  return beta * c * c / (std::tanh(beta * xi) + std::tanh(beta * (1.0 - xi)));
}

double impermeability(double gp, const MaterialParams& mp) {
  return mp.alpha_f + (mp.alpha_s - mp.alpha_f) * mp.q * (1.0 - gp) / (mp.q + gp);
}

double impermeability_derivative(double gp, const MaterialParams& mp) {
  return -(mp.alpha_s - mp.alpha_f) * mp.q * (1.0 + mp.q) / ((mp.q + gp) * (mp.q + gp));
}

std::vector<int> design_gamma_nodes(const BaseManifoldMesh& mesh) {
  std::vector<char> mark(mesh.num_q1(), 0);
  for (const Element& el : mesh.elements)
    if (!el.fluid)
      for (int k : el.q1) mark[k] = 1;
  std::vector<int> out;
  for (int k = 0; k < mesh.num_q1(); ++k)
    if (mark[k]) out.push_back(k);
  return out;
}

ManifoldFilter::ManifoldFilter(const BaseManifoldMesh& mesh, double r_m) {
  const int n = mesh.num_q2();
  Triplets tk, tm;
  tk.reserve(mesh.elements.size() * 81);
  tm.reserve(mesh.elements.size() * 81);
  const double r2 = r_m * r_m;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    double ke[9][9] = {}, me[9][9] = {};
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& p = mesh.point(e, q);
      area_ += p.w;
      for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b) {
          const double mab = p.w * p.phi2[a] * p.phi2[b];
          me[a][b] += mab;
          ke[a][b] += r2 * p.w * p.grad2[a].dot(p.grad2[b]) + mab;
        }
    }
    for (int a = 0; a < 9; ++a)
      for (int b = 0; b < 9; ++b) {
        tk.emplace_back(el.q2[a], el.q2[b], ke[a][b]);
        tm.emplace_back(el.q2[a], el.q2[b], me[a][b]);
      }
  }
  K_.resize(n, n);
  M_.resize(n, n);
  K_.setFromTriplets(tk.begin(), tk.end());
  M_.setFromTriplets(tm.begin(), tm.end());
  solver_.factorize(K_);
}

VecX ManifoldFilter::apply(const VecX& d_m, double A_d) const {
  if (d_m.size() != K_.rows()) throw Error("filter_manifold: d_m size mismatch");
  const VecX rhs = A_d * (M_ * (d_m.array() - 0.5).matrix());
  return solver_.solve(rhs);
}

PatternFilter::PatternFilter(const BaseManifoldMesh& mesh, const GeometricFactors& gf, double r_f)
    : mesh_(&mesh), gf_(&gf) {
  const int n = mesh.num_q1();
  Triplets t;
  t.reserve(mesh.elements.size() * 16);
  const double r2 = r_f * r_f;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    double ke[4][4] = {};
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& p = mesh.point(e, q);
      const PointGeometry& g = gf.vol[e * kQP + q];
      const double W = p.w * g.area.M;
      Vec3 pg[4];
      for (int a = 0; a < 4; ++a) pg[a] = g.P * p.grad1[a];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) ke[a][b] += W * (r2 * pg[a].dot(pg[b]) + p.phi1[a] * p.phi1[b]);
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) t.emplace_back(el.q1[a], el.q1[b], ke[a][b]);
  }
  K_.resize(n, n);
  K_.setFromTriplets(t.begin(), t.end());
  solver_.factorize(K_);
}

VecX PatternFilter::apply(const VecX& gamma) const {
  const BaseManifoldMesh& mesh = *mesh_;
  if (gamma.size() != mesh.num_q1()) throw Error("filter_pattern: gamma size mismatch");
  VecX rhs = VecX::Zero(mesh.num_q1());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& p = mesh.point(e, q);
      const double W = p.w * gf_->vol[e * kQP + q].area.M;
      double gq = 0.0;
      for (int a = 0; a < 4; ++a) gq += p.phi1[a] * gamma[el.q1[a]];
      for (int a = 0; a < 4; ++a) rhs[el.q1[a]] += W * gq * p.phi1[a];
    }
  }
  return solver_.solve(rhs);
}

VecX filter_manifold(const VecX& d_m, const BaseManifoldMesh& mesh, double r_m, double A_d) {
  return ManifoldFilter(mesh, r_m).apply(d_m, A_d);
}

VecX filter_pattern(const VecX& gamma, const VecX& d_f, const BaseManifoldMesh& mesh, double r_f,
                    double eps0) {
  const GeometricFactors gf = compute_geometric_factors(mesh, d_f, eps0);
  return PatternFilter(mesh, gf, r_f).apply(gamma);
}

void project_density(const BaseManifoldMesh& mesh, const VecX& gamma_f, double beta, double xi,
                     std::vector<double>& gamma_p, std::vector<double>& dgamma_p) {
  gamma_p.assign(mesh.qp.size(), 1.0);
  dgamma_p.assign(mesh.qp.size(), 0.0);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    if (el.fluid) continue;
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& p = mesh.point(e, q);
      double g = 0.0;
      for (int a = 0; a < 4; ++a) g += p.phi1[a] * gamma_f[el.q1[a]];
      gamma_p[e * kQP + q] = project(g, beta, xi);
      dgamma_p[e * kQP + q] = projection_derivative(g, beta, xi);
    }
  }
}

}  // namespace mto
