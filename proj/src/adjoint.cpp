#include "mto/adjoint.hpp"

#include <cmath>

namespace mto {

namespace {

constexpr int kLoc = 35;
using LocalMat = Eigen::Matrix<double, kLoc, kLoc, Eigen::RowMajor>;

// Rows: test (u~_a, p~_a, l~_a); columns: unknowns (u_a, p_a, l_a).
void adjoint_element(const FlowContext& ctx, int e, const double* loc, LocalMat& A) {
  const BaseManifoldMesh& mesh = *ctx.mesh;
  const double rho = ctx.fluid.rho, eta = ctx.fluid.eta;
  A.setZero();
  for (int q = 0; q < kQP; ++q) {
    const QuadPoint& p = mesh.point(e, q);
    const PointGeometry& g = ctx.gf->vol[e * kQP + q];
    const double W = p.w * g.area.M;
    const double alpha = ctx.alpha[e * kQP + q];
    const Vec3 m = multiplier_direction(g, p.n, ctx.lambda_sign);
    Vec3 psi[9];
    Vec3 u = Vec3::Zero();
    Mat3 G = Mat3::Zero();
    for (int a = 0; a < 9; ++a) {
      psi[a] = g.P * p.grad2[a];
      const Vec3 ua(loc[3 * a], loc[3 * a + 1], loc[3 * a + 2]);
      u += p.phi2[a] * ua;
      G += psi[a] * ua.transpose();
    }
    // test c,k against unknown a,j:
    //   rho (v.grad)u.u_a + rho (u.grad)v.u_a + eta/2 S(v):S(u_a) + alpha v.u_a
    for (int c = 0; c < 9; ++c) {
      const double vc = p.phi2[c];
      const double adv = u.dot(psi[c]);
      for (int a = 0; a < 9; ++a) {
        const double fa = p.phi2[a];
        for (int k = 0; k < 3; ++k)
          for (int j = 0; j < 3; ++j) {
            double v = rho * vc * G(k, j) * fa + eta * psi[a][k] * psi[c][j];
            if (j == k) v += rho * adv * fa + eta * psi[a].dot(psi[c]) + alpha * vc * fa;
            A(3 * c + k, 3 * a + j) += W * v;
          }
      }
      for (int b = 0; b < 4; ++b) {
        const double chi = p.phi1[b];
        for (int k = 0; k < 3; ++k) {
          A(3 * c + k, 27 + b) -= W * chi * psi[c][k];   // -p_a div v
          A(3 * c + k, 31 + b) += W * chi * vc * m[k];   // lambda_a v.m
          A(27 + b, 3 * c + k) -= W * chi * psi[c][k];   // -p~_a div u_a
          A(31 + b, 3 * c + k) += W * chi * vc * m[k];   // l~_a u_a.m
        }
      }
    }
  }
}

struct QPFields {
  Vec3 u, ua;
  Mat3 Qu, Qa;  // grad_Sigma of u and u_a (columns = components)
  double p = 0, pa = 0, lam = 0, lama = 0;
};

QPFields qp_fields(const QuadPoint& qp, const Element& el, const DofMap& dofs, const VecX& U, const VecX* Ua) {
  QPFields f;
  f.u.setZero();
  f.ua.setZero();
  f.Qu.setZero();
  f.Qa.setZero();
  for (int a = 0; a < 9; ++a) {
    Vec3 v, w = Vec3::Zero();
    for (int c = 0; c < 3; ++c) {
      v[c] = U[dofs.u(el.q2[a], c)];
      if (Ua) w[c] = (*Ua)[dofs.u(el.q2[a], c)];
    }
    f.u += qp.phi2[a] * v;
    f.Qu += qp.grad2[a] * v.transpose();
    f.ua += qp.phi2[a] * w;
    f.Qa += qp.grad2[a] * w.transpose();
  }
  for (int b = 0; b < 4; ++b) {
    const int k = el.q1[b];
    f.p += qp.phi1[b] * U[dofs.p(k)];
    f.lam += qp.phi1[b] * U[dofs.lam(k)];
    if (Ua) {
      f.pa += qp.phi1[b] * (*Ua)[dofs.p(k)];
      f.lama += qp.phi1[b] * (*Ua)[dofs.lam(k)];
    }
  }
  return f;
}

double q1_value(const QuadPoint& qp, const Element& el, const VecX& v) {
  double s = 0.0;
  for (int b = 0; b < 4; ++b) s += qp.phi1[b] * v[el.q1[b]];
  return s;
}

Vec3 q1_grad(const QuadPoint& qp, const Element& el, const VecX& v) {
  Vec3 s = Vec3::Zero();
  for (int b = 0; b < 4; ++b) s += qp.grad1[b] * v[el.q1[b]];
  return s;
}

}  // namespace

SpMat assemble_adjoint_operator(const FlowContext& ctx, const FlowSolver& solver, const VecX& U) {
  const BaseManifoldMesh& mesh = *ctx.mesh;
  const FreePattern& pat = solver.pattern();
  const int ne = mesh.num_elements();
  std::vector<LocalMat> Al(ne);
  parallel_for(ne, [&](int e) {
    double loc[35];
    gather_local(mesh.elements[e], solver.dofs(), U, loc);
    adjoint_element(ctx, e, loc, Al[e]);
  });
  SpMat A = pat.matrix;
  double* val = A.valuePtr();
  for (int e = 0; e < ne; ++e) {
    const int* s = pat.slot[e].data();
    const double* v = Al[e].data();
    for (int i = 0; i < 35 * 35; ++i)
      if (s[i] >= 0) val[s[i]] += v[i];
  }
  return A;
}

VecX solve_adjoint_ns(const FlowContext& ctx, const FlowSolver& solver, const VecX& U, const VecX& dJdU,
                      double* rel_residual) {
  const DofMap& dofs = solver.dofs();
  const SpMat A = assemble_adjoint_operator(ctx, solver, U);
  const VecX rhs = -dofs.restrict(dJdU);
  SparseLU lu;
  lu.factorize(A);
  VecX x = lu.solve(rhs);
  if (rel_residual) {
    const double bn = rhs.norm();
    *rel_residual = bn > 0 ? (A * x - rhs).norm() / bn : (A * x).norm();
  }
  VecX Ua = VecX::Zero(dofs.num_full());
  for (int i = 0; i < dofs.num_free(); ++i) Ua[dofs.free_to_full[i]] = x[i];
  return Ua;
}

VecX solve_adjoint_pattern_filter(const ForwardView& fw, const VecX* Ua, bool area) {
  const BaseManifoldMesh& mesh = *fw.mesh;
  const DesignState& ds = *fw.design;
  VecX b = VecX::Zero(mesh.num_q1());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    if (el.fluid) continue;
    for (int q = 0; q < kQP; ++q) {
      const int i = e * kQP + q;
      const QuadPoint& qp = mesh.point(e, q);
      const double W = qp.w * fw.gf->vol[i].area.M;
      double src;
      if (area) {
        src = ds.dgamma_p[i];
      } else {
        const QPFields f = qp_fields(qp, el, fw.solver->dofs(), *fw.U, Ua);
        const double da = impermeability_derivative(ds.gamma_p[i], fw.material);
        src = ds.dgamma_p[i] * da * (fw.omega * f.u.squaredNorm() + f.u.dot(f.ua));
      }
      for (int k = 0; k < 4; ++k) b[el.q1[k]] += W * src * qp.phi1[k];
    }
  }
  return fw.pattern->solve(-b);
}

VecX solve_adjoint_manifold_filter(const ForwardView& fw, Response r, const VecX* Ua, const VecX& gamma_fa) {
  const BaseManifoldMesh& mesh = *fw.mesh;
  const DesignState& ds = *fw.design;
  const double rf2 = fw.filter.r_f * fw.filter.r_f;
  const double rho = fw.ctx ? fw.ctx->fluid.rho : 1.0;
  const double eta = fw.ctx ? fw.ctx->fluid.eta : 1.0;
  const double w = fw.omega;
  const double sgn = fw.ctx ? fw.ctx->lambda_sign : 1.0;
  VecX b = VecX::Zero(mesh.num_q2());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    for (int q = 0; q < kQP; ++q) {
      const int i = e * kQP + q;
      const QuadPoint& qp = mesh.point(e, q);
      const PointGeometry& g = fw.gf->vol[i];
      const Mat3& P = g.P;
      const double M = g.area.M;
      double I = 0.0;
      Mat3 E = Mat3::Zero();
      Vec3 c = Vec3::Zero();
      // filter terms, present for every response with a nonzero gamma_fa
      const double gfa = q1_value(qp, el, gamma_fa);
      const Vec3 qfa = q1_grad(qp, el, gamma_fa);
      const Vec3 qf = q1_grad(qp, el, ds.gamma_f);
      const double gf_v = q1_value(qp, el, ds.gamma_f);
      const double gam = q1_value(qp, el, ds.gamma);
      I += rf2 * (P * qf).dot(P * qfa) + (gf_v - gam) * gfa;
      E += rf2 * (qf * (P * qfa).transpose() + (P * qf) * qfa.transpose());
      if (r == Response::Area) {
        I += 1.0;
      } else if (r == Response::AreaWeighted) {
        I += ds.gamma_p[i];
      } else {
        const QPFields f = qp_fields(qp, el, fw.solver->dofs(), *fw.U, Ua);
        const double alpha = fw.ctx->alpha[i];
        const Mat3 G = P * f.Qu, Ga = P * f.Qa;
        const Mat3 S1 = G + G.transpose(), S2 = Ga + Ga.transpose();
        const Vec3 m = multiplier_direction(g, qp.n, sgn);
        I += w * (0.5 * eta * S1.cwiseProduct(S1).sum() + alpha * f.u.squaredNorm());
        I += rho * f.u.dot(G * f.ua) + 0.5 * eta * S1.cwiseProduct(S2).sum() - f.p * Ga.trace() -
             f.pa * G.trace() + alpha * f.u.dot(f.ua) + (f.lam * f.ua + f.lama * f.u).dot(m);
        E += 2.0 * w * eta * S1 * f.Qu.transpose();
        E += rho * f.u * (f.Qu * f.ua).transpose();
        E += eta * (S2 * f.Qu.transpose() + S1 * f.Qa.transpose());
        E -= f.p * f.Qa.transpose() + f.pa * f.Qu.transpose();
        c = f.lam * f.ua + f.lama * f.u;
      }
      const Vec3& fv = g.f;
      const double N2 = g.N * g.N;
      Vec3 dIdg = (E + E.transpose()) * fv / N2 - 2.0 * fv.dot(E * fv) * fv / (N2 * N2);
      if (c.squaredNorm() > 0.0) {
        const Vec3 fl = qp.n - sgn * g.g;
        const double Nl = std::sqrt(fl.squaredNorm() + (N2 - fv.squaredNorm()));
        dIdg += sgn * (-c / Nl + fl * fl.dot(c) / (Nl * Nl * Nl));
      }
      const double dLdd = I * g.area.dM_d_df;
      const Vec3 dLdg = M * dIdg + I * g.area.dM_d_grad_df;
      for (int k = 0; k < 9; ++k) b[el.q2[k]] += qp.w * (dLdd * qp.phi2[k] + dLdg.dot(qp.grad2[k]));
    }
  }
  if (r == Response::Objective && w < 1.0) {
    const DofMap& dofs = fw.solver->dofs();
    for (size_t be = 0; be < mesh.edges.size(); ++be) {
      const BoundaryEdge& ed = mesh.edges[be];
      const BoundaryTag tag = mesh.segments[ed.segment].tag;
      if (tag == BoundaryTag::Wall) continue;
      const double sign = tag == BoundaryTag::Inlet ? 1.0 : -1.0;
      const Element& el = mesh.elements[ed.element];
      for (int q = 0; q < kEQP; ++q) {
        const EdgeQuadPoint& qp = mesh.edge_point(static_cast<int>(be), q);
        const LineFactor& lf = fw.gf->edge[be * kEQP + q].line;
        double pr = 0.0;
        for (int k = 0; k < 4; ++k) pr += qp.phi1[k] * (*fw.U)[dofs.p(el.q1[k])];
        const double B = (1.0 - w) * sign * pr;
        for (int k = 0; k < 9; ++k)
          b[el.q2[k]] += qp.w * B * (lf.dL_d_df * qp.phi2[k] + lf.dL_d_grad_df.dot(qp.grad2[k]));
      }
    }
  }
  return fw.manifold->solve(-b);
}

SensitivityVector assemble_sensitivity(const ForwardView& fw, const VecX& gamma_fa, const VecX& d_fa) {
  const BaseManifoldMesh& mesh = *fw.mesh;
  SensitivityVector s;
  s.wrt_gamma = VecX::Zero(mesh.num_q1());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& qp = mesh.point(e, q);
      const double W = qp.w * fw.gf->vol[e * kQP + q].area.M;
      const double v = q1_value(qp, el, gamma_fa);
      for (int k = 0; k < 4; ++k) s.wrt_gamma[el.q1[k]] -= W * v * qp.phi1[k];
    }
  }
  s.wrt_dm = -fw.filter.A_d * (fw.manifold->mass() * d_fa);
  return s;
}

SensitivityVector sensitivity_objective(const ForwardView& fw, AdjointState* state) {
  const VecX dJ = objective_gradient(*fw.ctx, fw.solver->dofs(), *fw.U, fw.omega);
  AdjointState a;
  a.Ua = solve_adjoint_ns(*fw.ctx, *fw.solver, *fw.U, dJ, &a.ns_residual);
  a.gamma_fa = solve_adjoint_pattern_filter(fw, &a.Ua, false);
  a.d_fa = solve_adjoint_manifold_filter(fw, Response::Objective, &a.Ua, a.gamma_fa);
  SensitivityVector s = assemble_sensitivity(fw, a.gamma_fa, a.d_fa);
  if (state) *state = std::move(a);
  return s;
}

SensitivityVector sensitivity_area(const ForwardView& fw, double* s_out) {
  const AreaResult ar = evaluate_area(*fw.mesh, *fw.gf, fw.design->gamma_p);
  // s |Gamma|
  const VecX g1 = solve_adjoint_pattern_filter(fw, nullptr, true);
  const VecX d1 = solve_adjoint_manifold_filter(fw, Response::AreaWeighted, nullptr, g1);
  const SensitivityVector s1 = assemble_sensitivity(fw, g1, d1);
  // |Gamma|: the pattern-filter adjoint has zero source
  const VecX g2 = VecX::Zero(fw.mesh->num_q1());
  const VecX d2 = solve_adjoint_manifold_filter(fw, Response::Area, nullptr, g2);
  const SensitivityVector s2 = assemble_sensitivity(fw, g2, d2);
  SensitivityVector s;
  s.wrt_gamma = (s1.wrt_gamma - ar.s * s2.wrt_gamma) / ar.area_gamma;
  s.wrt_dm = (s1.wrt_dm - ar.s * s2.wrt_dm) / ar.area_gamma;
  if (s_out) *s_out = ar.s;
  return s;
}

SensitivityVector sensitivity_volume(const BaseManifoldMesh& mesh, const ManifoldFilter& filter, double A_d,
                                     VecX* d_fa_out) {
  const double area = filter.base_area();
  const VecX src = filter.mass() * VecX::Constant(mesh.num_q2(), 1.0 / area);
  const VecX d_fa = filter.solve(-src);
  SensitivityVector s;
  s.wrt_gamma = VecX::Zero(mesh.num_q1());
  s.wrt_dm = -A_d * (filter.mass() * d_fa);
  if (d_fa_out) *d_fa_out = d_fa;
  return s;
}

}  // namespace mto
