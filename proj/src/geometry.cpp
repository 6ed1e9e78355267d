#include "mto/geometry.hpp"

#include <cmath>
#include <sstream>

namespace mto {

double regularized_norm(const Vec3& v, double eps0) { return std::sqrt(v.squaredNorm() + eps0); }

double norm_variational(const Vec3& f, const Vec3& df, double eps0) {
  return f.dot(df) / regularized_norm(f, eps0);
}

Vec3 transformed_normal(const Vec3& grad_df, const Vec3& n_sigma, double eps0) {
  const Vec3 f = n_sigma - grad_df;
  return f / regularized_norm(f, eps0);
}

Mat3 transformed_projector(const Vec3& grad_df, const Vec3& n_sigma, double eps0) {
  const Vec3 f = n_sigma - grad_df;
  return Mat3::Identity() - f * f.transpose() / (f.squaredNorm() + eps0);
}

Vec3 transformed_gradient(const Vec3& grad_sigma_g, const Vec3& grad_df, const Vec3& n_sigma,
                          double eps0) {
  return transformed_projector(grad_df, n_sigma, eps0) * grad_sigma_g;
}

double transformed_divergence(const Mat3& grad_sigma_G, const Vec3& grad_df, const Vec3& n_sigma,
                              double eps0) {
  return (transformed_projector(grad_df, n_sigma, eps0) * grad_sigma_G).trace();
}

Mat3 projector_variational(const Vec3& grad_df, const Vec3& gt, const Vec3& n_sigma, double eps0) {
  const Vec3 f = n_sigma - grad_df;
  const double N2 = f.squaredNorm() + eps0;
  return (gt * f.transpose() + f * gt.transpose()) / N2 -
         2.0 * f.dot(gt) * f * f.transpose() / (N2 * N2);
}

Vec3 gradient_variational(const Vec3& grad_sigma_g, const Vec3& grad_df, const Vec3& gt,
                          const Vec3& n_sigma, double eps0) {
  return projector_variational(grad_df, gt, n_sigma, eps0) * grad_sigma_g;
}

double divergence_variational(const Mat3& grad_sigma_G, const Vec3& grad_df, const Vec3& gt,
                              const Vec3& n_sigma, double eps0) {
  return (projector_variational(grad_df, gt, n_sigma, eps0) * grad_sigma_G).trace();
}

Vec3 normal_variational(const Vec3& grad_df, const Vec3& gt, const Vec3& n_sigma, double eps0) {
  const Vec3 f = n_sigma - grad_df;
  const double N = regularized_norm(f, eps0);
  return -gt / N + f * f.dot(gt) / (N * N * N);
}

MapJacobian map_jacobian(double d_f, const Vec3& grad_df, const Vec3& n_sigma, const Mat3& shape,
                         bool check) {
  MapJacobian r;
  r.jac = Mat3::Identity() + grad_df * n_sigma.transpose() + d_f * shape;
  r.det = r.jac.determinant();
  if (check && !(r.det > 0.0)) {
    std::ostringstream os;
    os << "offset map folds: det = " << r.det << " at d_f = " << d_f << ", |grad d_f| = " << grad_df.norm();
    throw GeometryError(os.str());
  }
  return r;
}

double area_measure_factor(const Mat3& jac, double det, const Vec3& n_gamma, double eps0) {
  return det / regularized_norm(jac * n_gamma, eps0);
}

AreaFactor area_measure_factor(double d_f, const Vec3& g, const Vec3& n, const Mat3& S, double eps0) {
  const MapJacobian mj = map_jacobian(d_f, g, n, S);
  const Mat3& J = mj.jac;
  const Vec3 f = n - g;
  const double N = regularized_norm(f, eps0);
  const Vec3 m = f / N;
  const Vec3 v = J * m;
  const double V2 = v.squaredNorm() + eps0;
  AreaFactor a;
  a.M = mj.det / std::sqrt(V2);
  const Mat3 Jinv = J.inverse();
  const Vec3 Jtv = J.transpose() * v;
  a.dM_d_df = a.M * ((Jinv * S).trace() - v.dot(S * m) / V2);
  const Vec3 dv = n.dot(m) * v - Jtv / N + f * f.dot(Jtv) / (N * N * N);
  a.dM_d_grad_df = a.M * (Jinv.transpose() * n - dv / V2);
  return a;
}

LineFactor boundary_measure_factor(double d_f, const Vec3& g, const Vec3& n, const Mat3& S,
                                   const Vec3& tangent, double eps0) {
  const Vec3 t = tangent.normalized();
  const Vec3 St = S * t;
  const Vec3 tg = t + n * g.dot(t) + d_f * St;
  LineFactor l;
  l.L = regularized_norm(tg, eps0);
  l.dL_d_df = tg.dot(St) / l.L;
  l.dL_d_grad_df = tg.dot(n) * t / l.L;
  return l;
}

PointGeometry point_geometry(double d_f, const Vec3& g, const Vec3& n, const Mat3& S, double eps0) {
  PointGeometry p;
  p.d = d_f;
  p.g = g;
  p.f = n - g;
  const double N2 = p.f.squaredNorm() + eps0;
  p.N = std::sqrt(N2);
  p.m = p.f / p.N;
  p.P = Mat3::Identity() - p.f * p.f.transpose() / N2;
  p.det = map_jacobian(d_f, g, n, S).det;
  p.area = area_measure_factor(d_f, g, n, S, eps0);
  return p;
}

GeometricFactors compute_geometric_factors(const BaseManifoldMesh& mesh, const VecX& d_f, double eps0) {
  if (d_f.size() != mesh.num_q2()) throw Error("compute_geometric_factors: d_f size mismatch");
  GeometricFactors gf;
  gf.eps0 = eps0;
  gf.vol.resize(mesh.qp.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& qp = mesh.point(e, q);
      double d = 0.0;
      Vec3 g = Vec3::Zero();
      for (int a = 0; a < 9; ++a) {
        d += qp.phi2[a] * d_f[el.q2[a]];
        g += qp.grad2[a] * d_f[el.q2[a]];
      }
      gf.vol[e * kQP + q] = point_geometry(d, g, qp.n, qp.shape, eps0);
    }
  }
  gf.edge.resize(mesh.eqp.size());
  for (size_t b = 0; b < mesh.edges.size(); ++b) {
    const Element& el = mesh.elements[mesh.edges[b].element];
    for (int q = 0; q < kEQP; ++q) {
      const EdgeQuadPoint& qp = mesh.eqp[b * kEQP + q];
      EdgeGeometry& eg = gf.edge[b * kEQP + q];
      for (int a = 0; a < 9; ++a) {
        eg.d += qp.phi2[a] * d_f[el.q2[a]];
        eg.g += qp.grad2[a] * d_f[el.q2[a]];
      }
      eg.line = boundary_measure_factor(eg.d, eg.g, qp.n, qp.shape, qp.tangent, eps0);
    }
  }
  return gf;
}

std::vector<Vec3> surface_gradient(const VecX& field, const BaseManifoldMesh& mesh, Space space) {
  const int n = space == Space::Linear ? mesh.num_q1() : mesh.num_q2();
  if (field.size() != n) throw Error("surface_gradient: field length mismatch");
  std::vector<Vec3> out(mesh.qp.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& qp = mesh.point(e, q);
      Vec3 g = Vec3::Zero();
      if (space == Space::Linear)
        for (int a = 0; a < 4; ++a) g += qp.grad1[a] * field[el.q1[a]];
      else
        for (int a = 0; a < 9; ++a) g += qp.grad2[a] * field[el.q2[a]];
      out[e * kQP + q] = g;
    }
  }
  return out;
}

std::vector<double> interpolate(const VecX& field, const BaseManifoldMesh& mesh, Space space) {
  const int n = space == Space::Linear ? mesh.num_q1() : mesh.num_q2();
  if (field.size() != n) throw Error("interpolate: field length mismatch");
  std::vector<double> out(mesh.qp.size());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& qp = mesh.point(e, q);
      double v = 0.0;
      if (space == Space::Linear)
        for (int a = 0; a < 4; ++a) v += qp.phi1[a] * field[el.q1[a]];
      else
        for (int a = 0; a < 9; ++a) v += qp.phi2[a] * field[el.q2[a]];
      out[e * kQP + q] = v;
    }
  }
  return out;
}

}  // namespace mto
