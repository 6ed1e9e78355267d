#include "mto/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mto {

namespace {

constexpr int kLoc = 35;  // 27 velocity + 4 pressure + 4 multiplier
using LocalMat = Eigen::Matrix<double, kLoc, kLoc, Eigen::RowMajor>;
using LocalVec = Eigen::Matrix<double, kLoc, 1>;

void element_kernel(const FlowContext& ctx, int e, const double* loc, LocalVec* Re, LocalMat* Ke) {
  const BaseManifoldMesh& mesh = *ctx.mesh;
  const double rho = ctx.fluid.rho, eta = ctx.fluid.eta;
  if (Re) Re->setZero();
  if (Ke) Ke->setZero();
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
    double pres = 0.0, lam = 0.0;
    for (int b = 0; b < 4; ++b) {
      pres += p.phi1[b] * loc[27 + b];
      lam += p.phi1[b] * loc[31 + b];
    }
    const Mat3 S = G + G.transpose();
    if (Re) {
      const Vec3 uG = G.transpose() * u;
      for (int a = 0; a < 9; ++a) {
        const Vec3 r = rho * p.phi2[a] * uG + eta * (S * psi[a]) - pres * psi[a] +
                       alpha * p.phi2[a] * u + lam * p.phi2[a] * m;
        for (int j = 0; j < 3; ++j) (*Re)[3 * a + j] += W * r[j];
      }
      const double trG = G.trace(), um = u.dot(m);
      for (int b = 0; b < 4; ++b) {
        (*Re)[27 + b] -= W * p.phi1[b] * trG;
        (*Re)[31 + b] += W * p.phi1[b] * um;
      }
    }
    if (Ke) {
      LocalMat& K = *Ke;
      for (int a = 0; a < 9; ++a) {
        const double fa = p.phi2[a];
        for (int c = 0; c < 9; ++c) {
          const double fc = p.phi2[c];
          const double diag = W * (rho * fa * u.dot(psi[c]) + eta * psi[c].dot(psi[a]) + alpha * fa * fc);
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
              double v = W * (rho * fa * fc * G(k, j) + eta * psi[c][j] * psi[a][k]);
              if (j == k) v += diag;
              K(3 * a + j, 3 * c + k) += v;
            }
        }
        for (int b = 0; b < 4; ++b) {
          const double chi = p.phi1[b];
          for (int j = 0; j < 3; ++j) {
            const double vp = -W * chi * psi[a][j];
            const double vl = W * chi * fa * m[j];
            K(3 * a + j, 27 + b) += vp;
            K(27 + b, 3 * a + j) += vp;
            K(3 * a + j, 31 + b) += vl;
            K(31 + b, 3 * a + j) += vl;
          }
        }
      }
    }
  }
}

}  // namespace

Vec3 multiplier_direction(const PointGeometry& g, const Vec3& n_sigma, double sign) {
  if (sign == 1.0) return g.m;
  const Vec3 f = n_sigma - sign * g.g;
  return f / std::sqrt(f.squaredNorm() + (g.N * g.N - g.f.squaredNorm()));
}

DofMap::DofMap(const BaseManifoldMesh& mesh) : n2(mesh.num_q2()), n1(mesh.num_q1()) {
  velocity_fixed.assign(n2, 0);
  lambda_fixed.assign(n1, 0);
  pressure_pinned.assign(n1, 0);
  for (const BoundaryEdge& be : mesh.edges) {
    const BoundaryTag tag = mesh.segments[be.segment].tag;
    if (tag == BoundaryTag::Open) continue;
    for (int k : be.q2) velocity_fixed[k] = 1;
  }
  for (int k = 0; k < n1; ++k) lambda_fixed[k] = velocity_fixed[mesh.q1_nodes[k]];
  for (const PinPoint& pp : mesh.pins) pressure_pinned[pp.q1_node] = 1;
  full_to_free.assign(num_full(), -1);
  for (int i = 0; i < n2; ++i)
    for (int c = 0; c < 3; ++c)
      if (!velocity_fixed[i]) full_to_free[u(i, c)] = 0;
  for (int k = 0; k < n1; ++k) {
    if (!pressure_pinned[k]) full_to_free[p(k)] = 0;
    if (!lambda_fixed[k]) full_to_free[lam(k)] = 0;
  }
  for (int i = 0; i < num_full(); ++i)
    if (full_to_free[i] == 0) {
      full_to_free[i] = static_cast<int>(free_to_full.size());
      free_to_full.push_back(i);
    }
}

VecX DofMap::restrict(const VecX& full) const {
  VecX r(num_free());
  for (int i = 0; i < num_free(); ++i) r[i] = full[free_to_full[i]];
  return r;
}

void gather_local(const Element& el, const DofMap& dofs, const VecX& U, double* loc) {
  for (int a = 0; a < 9; ++a)
    for (int c = 0; c < 3; ++c) loc[3 * a + c] = U[dofs.u(el.q2[a], c)];
  for (int b = 0; b < 4; ++b) {
    loc[27 + b] = U[dofs.p(el.q1[b])];
    loc[31 + b] = U[dofs.lam(el.q1[b])];
  }
}

namespace {
std::array<int, 35> local_dofs(const Element& el, const DofMap& dofs) {
  std::array<int, 35> ix{};
  for (int a = 0; a < 9; ++a)
    for (int c = 0; c < 3; ++c) ix[3 * a + c] = dofs.u(el.q2[a], c);
  for (int b = 0; b < 4; ++b) {
    ix[27 + b] = dofs.p(el.q1[b]);
    ix[31 + b] = dofs.lam(el.q1[b]);
  }
  return ix;
}
}  // namespace

FreePattern::FreePattern(const BaseManifoldMesh& mesh, const DofMap& dofs) {
  const int nf = dofs.num_free();
  Triplets t;
  t.reserve(mesh.elements.size() * 35 * 35);
  local_full.resize(mesh.elements.size());
  for (size_t e = 0; e < mesh.elements.size(); ++e) {
    local_full[e] = local_dofs(mesh.elements[e], dofs);
    for (int i : local_full[e]) {
      const int fi = dofs.full_to_free[i];
      if (fi < 0) continue;
      for (int j : local_full[e]) {
        const int fj = dofs.full_to_free[j];
        if (fj >= 0) t.emplace_back(fi, fj, 0.0);
      }
    }
  }
  matrix.resize(nf, nf);
  matrix.setFromTriplets(t.begin(), t.end());
  matrix.makeCompressed();
  matrix.coeffs().setZero();
  const int* outer = matrix.outerIndexPtr();
  const int* inner = matrix.innerIndexPtr();
  slot.resize(mesh.elements.size());
  for (size_t e = 0; e < mesh.elements.size(); ++e)
    for (int r = 0; r < 35; ++r)
      for (int c = 0; c < 35; ++c) {
        const int fi = dofs.full_to_free[local_full[e][r]];
        const int fj = dofs.full_to_free[local_full[e][c]];
        int s = -1;
        if (fi >= 0 && fj >= 0) {
          const int* lo = inner + outer[fj];
          const int* hi = inner + outer[fj + 1];
          s = static_cast<int>(std::lower_bound(lo, hi, fi) - inner);
        }
        slot[e][r * 35 + c] = s;
      }
}

FlowContext make_flow_context(const BaseManifoldMesh& mesh, const GeometricFactors& gf,
                              const std::vector<double>& gamma_p, const FluidParams& fluid,
                              const MaterialParams& mat, double lambda_sign) {
  FlowContext ctx;
  ctx.mesh = &mesh;
  ctx.gf = &gf;
  ctx.fluid = fluid;
  ctx.lambda_sign = lambda_sign;
  ctx.alpha.resize(gamma_p.size());
  for (size_t i = 0; i < gamma_p.size(); ++i) ctx.alpha[i] = impermeability(gamma_p[i], mat);
  return ctx;
}

FlowSolver::FlowSolver(const BaseManifoldMesh& mesh)
    : mesh_(&mesh), dofs_(mesh), inlet_(inlet_profile(mesh, 1.0)), pattern_(mesh, dofs_) {}

VecX FlowSolver::dirichlet_values(double U0) const {
  VecX U = VecX::Zero(dofs_.num_full());
  for (int i = 0; i < dofs_.n2; ++i)
    if (inlet_.on_inlet[i])
      for (int c = 0; c < 3; ++c) U[dofs_.u(i, c)] = U0 * inlet_.value[i][c];
  for (const PinPoint& pp : mesh_->pins) U[dofs_.p(pp.q1_node)] = pp.value;
  return U;
}

void FlowSolver::assemble(const FlowContext& ctx, const VecX& U, VecX* R, SpMat* K) const {
  const int ne = mesh_->num_elements();
  std::vector<LocalVec> Rl(R ? ne : 0);
  std::vector<LocalMat> Kl(K ? ne : 0);
  parallel_for(ne, [&](int e) {
    double loc[35];
    gather_local(mesh_->elements[e], dofs_, U, loc);
    element_kernel(ctx, e, loc, R ? &Rl[e] : nullptr, K ? &Kl[e] : nullptr);
  });
  if (R) {
    *R = VecX::Zero(dofs_.num_full());
    for (int e = 0; e < ne; ++e)
      for (int r = 0; r < 35; ++r) (*R)[pattern_.local_full[e][r]] += Rl[e][r];
  }
  if (K) {
    *K = pattern_.matrix;
    double* val = K->valuePtr();
    for (int e = 0; e < ne; ++e) {
      const int* s = pattern_.slot[e].data();
      const double* v = Kl[e].data();
      for (int i = 0; i < 35 * 35; ++i)
        if (s[i] >= 0) val[s[i]] += v[i];
    }
  }
}

VecX FlowSolver::residual(const FlowContext& ctx, const VecX& U) const {
  VecX R;
  assemble(ctx, U, &R, nullptr);
  return R;
}

bool FlowSolver::newton(const FlowContext& ctx, const SolverOptions& opt, double scale, VecX& U,
                        int& iters, double& res) const {
  const VecX D = dirichlet_values(scale * ctx.fluid.U0);
  for (int i = 0; i < dofs_.num_full(); ++i)
    if (dofs_.full_to_free[i] < 0) U[i] = D[i];
  const double ref = dofs_.restrict(residual(ctx, D)).norm();
  const double tol = std::max(opt.rtol * ref, opt.atol);
  bool polished = !opt.polish;
  SparseLU lu;
  for (int it = 0; it <= opt.max_newton; ++it) {
    VecX R;
    SpMat K;
    assemble(ctx, U, &R, &K);
    VecX Rf = dofs_.restrict(R);
    const double r0 = Rf.norm();
    res = r0;
    if (opt.verbose) std::fprintf(stderr, "  newton %d |R| = %.3e (tol %.3e)\n", it, r0, tol);
    if (!std::isfinite(r0)) return false;
    if (r0 <= tol) {
      if (polished || r0 <= opt.atol) return true;
      polished = true;
    }
    if (it == opt.max_newton) break;
    lu.factorize(K);
    const VecX dx = lu.solve(-Rf);
    ++iters;
    if (r0 <= tol) {  // polishing step, no line search
      for (int i = 0; i < dofs_.num_free(); ++i) U[dofs_.free_to_full[i]] += dx[i];
      res = dofs_.restrict(residual(ctx, U)).norm();
      return true;
    }
    double t = 1.0;
    VecX Ut = U;
    for (;;) {
      Ut = U;
      for (int i = 0; i < dofs_.num_free(); ++i) Ut[dofs_.free_to_full[i]] += t * dx[i];
      const double rt = dofs_.restrict(residual(ctx, Ut)).norm();
      if ((std::isfinite(rt) && rt < (1.0 - 1e-4 * t) * r0) || t < 1.0 / 64.0) break;
      t *= 0.5;
    }
    U = Ut;
  }
  return false;
}

FlowState FlowSolver::solve(const FlowContext& ctx, const SolverOptions& opt, const FlowState* warm) const {
  FlowState st;
  st.U = (warm && warm->U.size() == dofs_.num_full()) ? warm->U : VecX::Zero(dofs_.num_full());
  VecX U = st.U;
  int iters = 0;
  double res = 0.0;
  if (newton(ctx, opt, 1.0, U, iters, res)) {
    st.U = U;
    st.newton_iters = iters;
    st.residual = res;
    return st;
  }
  // continuation in the inlet speed: halve until Newton converges, then climb back
  double s = 1.0;
  VecX base = warm ? st.U : VecX::Zero(dofs_.num_full());
  for (int h = 1; h <= opt.max_halvings; ++h) {
    s *= 0.5;
    U = base;
    if (newton(ctx, opt, s, U, iters, res)) break;
    if (h == opt.max_halvings) throw SolverError("Newton failed even at U0 scaled by " + std::to_string(s));
  }
  while (s < 1.0) {
    double next = std::min(1.0, 2.0 * s);
    VecX Un = U;
    if (newton(ctx, opt, next, Un, iters, res)) {
      U = Un;
      s = next;
    } else {
      throw SolverError("Newton failed during U0 continuation at scale " + std::to_string(next));
    }
  }
  st.U = U;
  st.newton_iters = iters;
  st.residual = res;
  st.scale_reached = s;
  return st;
}

ObjectiveParts evaluate_objective(const FlowContext& ctx, const DofMap& dofs, const VecX& U, double omega) {
  const BaseManifoldMesh& mesh = *ctx.mesh;
  ObjectiveParts o;
  const double eta = ctx.fluid.eta;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    double loc[35];
    gather_local(mesh.elements[e], dofs, U, loc);
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& p = mesh.point(e, q);
      const PointGeometry& g = ctx.gf->vol[e * kQP + q];
      const double W = p.w * g.area.M;
      Vec3 u = Vec3::Zero();
      Mat3 G = Mat3::Zero();
      for (int a = 0; a < 9; ++a) {
        const Vec3 ua(loc[3 * a], loc[3 * a + 1], loc[3 * a + 2]);
        u += p.phi2[a] * ua;
        G += (g.P * p.grad2[a]) * ua.transpose();
      }
      const Mat3 S = G + G.transpose();
      o.dissipation += W * 0.5 * eta * S.cwiseProduct(S).sum();
      o.darcy += W * ctx.alpha[e * kQP + q] * u.squaredNorm();
    }
  }
  for (size_t b = 0; b < mesh.edges.size(); ++b) {
    const BoundaryEdge& be = mesh.edges[b];
    const BoundaryTag tag = mesh.segments[be.segment].tag;
    if (tag == BoundaryTag::Wall) continue;
    const double sign = tag == BoundaryTag::Inlet ? 1.0 : -1.0;
    const Element& el = mesh.elements[be.element];
    for (int q = 0; q < kEQP; ++q) {
      const EdgeQuadPoint& p = mesh.edge_point(static_cast<int>(b), q);
      double pr = 0.0;
      for (int k = 0; k < 4; ++k) pr += p.phi1[k] * U[dofs.p(el.q1[k])];
      o.pressure_drop += sign * p.w * ctx.gf->edge[b * kEQP + q].line.L * pr;
    }
  }
  o.J = omega * (o.dissipation + o.darcy) + (1.0 - omega) * o.pressure_drop;
  return o;
}

VecX objective_gradient(const FlowContext& ctx, const DofMap& dofs, const VecX& U, double omega) {
  const BaseManifoldMesh& mesh = *ctx.mesh;
  VecX dJ = VecX::Zero(dofs.num_full());
  const double eta = ctx.fluid.eta;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    double loc[35];
    gather_local(el, dofs, U, loc);
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& p = mesh.point(e, q);
      const PointGeometry& g = ctx.gf->vol[e * kQP + q];
      const double W = p.w * g.area.M;
      const double alpha = ctx.alpha[e * kQP + q];
      Vec3 psi[9];
      Vec3 u = Vec3::Zero();
      Mat3 G = Mat3::Zero();
      for (int a = 0; a < 9; ++a) {
        psi[a] = g.P * p.grad2[a];
        const Vec3 ua(loc[3 * a], loc[3 * a + 1], loc[3 * a + 2]);
        u += p.phi2[a] * ua;
        G += psi[a] * ua.transpose();
      }
      const Mat3 S = G + G.transpose();
      for (int c = 0; c < 9; ++c) {
        const Vec3 d = omega * W * (2.0 * eta * (S * psi[c]) + 2.0 * alpha * p.phi2[c] * u);
        for (int k = 0; k < 3; ++k) dJ[dofs.u(el.q2[c], k)] += d[k];
      }
    }
  }
  for (size_t b = 0; b < mesh.edges.size(); ++b) {
    const BoundaryEdge& be = mesh.edges[b];
    const BoundaryTag tag = mesh.segments[be.segment].tag;
    if (tag == BoundaryTag::Wall) continue;
    const double sign = tag == BoundaryTag::Inlet ? 1.0 : -1.0;
    const Element& el = mesh.elements[be.element];
    for (int q = 0; q < kEQP; ++q) {
      const EdgeQuadPoint& p = mesh.edge_point(static_cast<int>(b), q);
      const double c = (1.0 - omega) * sign * p.w * ctx.gf->edge[b * kEQP + q].line.L;
      for (int k = 0; k < 4; ++k) dJ[dofs.p(el.q1[k])] += c * p.phi1[k];
    }
  }
  return dJ;
}

AreaResult evaluate_area(const BaseManifoldMesh& mesh, const GeometricFactors& gf,
                         const std::vector<double>& gamma_p) {
  AreaResult r;
  double num = 0.0;
  for (size_t i = 0; i < mesh.qp.size(); ++i) {
    const double W = mesh.qp[i].w * gf.vol[i].area.M;
    num += W * gamma_p[i];
    r.area_gamma += W;
  }
  r.s = num / r.area_gamma;
  return r;
}

double evaluate_volume(const VecX& d_f, const BaseManifoldMesh& mesh) {
  const std::vector<double> d = interpolate(d_f, mesh, Space::Quadratic);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < mesh.qp.size(); ++i) {
    num += mesh.qp[i].w * d[i];
    den += mesh.qp[i].w;
  }
  return num / den;
}

FlowDiagnostics flow_diagnostics(const FlowContext& ctx, const FlowSolver& solver, const VecX& U) {
  const BaseManifoldMesh& mesh = *ctx.mesh;
  const DofMap& dofs = solver.dofs();
  FlowDiagnostics d;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Element& el = mesh.elements[e];
    for (int q = 0; q < kQP; ++q) {
      const QuadPoint& p = mesh.point(e, q);
      Vec3 u = Vec3::Zero();
      for (int a = 0; a < 9; ++a)
        for (int c = 0; c < 3; ++c) u[c] += p.phi2[a] * U[dofs.u(el.q2[a], c)];
      const Vec3& m = ctx.gf->vol[e * kQP + q].m;
      d.max_tangential = std::max(d.max_tangential, std::abs(u.dot(m)));
      d.max_speed = std::max(d.max_speed, u.norm());
      if (!el.fluid) d.max_speed_solid = std::max(d.max_speed_solid, u.norm());
    }
  }
  const VecX R = solver.residual(ctx, U);
  for (int k = 0; k < dofs.n1; ++k) {
    if (!dofs.pressure_pinned[k]) d.max_continuity = std::max(d.max_continuity, std::abs(R[dofs.p(k)]));
    if (!dofs.lambda_fixed[k]) d.max_constraint = std::max(d.max_constraint, std::abs(R[dofs.lam(k)]));
  }
  return d;
}

}  // namespace mto
