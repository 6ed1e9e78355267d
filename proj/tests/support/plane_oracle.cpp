#include "support/plane_oracle.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <array>
#include <cmath>
#include <stdexcept>

namespace mto::oracle {

namespace {

using Sp = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

const double kG[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
const double kW[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

void lag2(double t, double* N, double* dN) {
  N[0] = 0.5 * t * (t - 1);
  N[1] = 1 - t * t;
  N[2] = 0.5 * t * (t + 1);
  dN[0] = t - 0.5;
  dN[1] = -2 * t;
  dN[2] = t + 0.5;
}

// Basis data at one Gauss point of an axis-aligned rectangle.
struct Pt {
  double w;
  double N2[9], dx2[9], dy2[9];
  double N1[4], dx1[4], dy1[4];
};

struct Rect {
  double x0, x1, y0, y1;
};

Rect rect_of(const BaseManifoldMesh& m, const Element& el) {
  const Vec3& a = m.nodes[el.q2[0]];
  const Vec3& b = m.nodes[el.q2[8]];
  if (std::abs(a[2]) > 0 || std::abs(b[2]) > 0) throw std::runtime_error("plane oracle needs z = 0");
  return {a[0], b[0], a[1], b[1]};
}

Pt point(const Rect& r, int i, int j) {
  Pt p;
  const double hx = r.x1 - r.x0, hy = r.y1 - r.y0;
  const double s = kG[i], t = kG[j];
  p.w = kW[i] * kW[j] * hx * hy / 4.0;
  double a[3], da[3], b[3], db[3];
  lag2(s, a, da);
  lag2(t, b, db);
  for (int jj = 0; jj < 3; ++jj)
    for (int ii = 0; ii < 3; ++ii) {
      p.N2[3 * jj + ii] = a[ii] * b[jj];
      p.dx2[3 * jj + ii] = da[ii] * b[jj] * 2.0 / hx;
      p.dy2[3 * jj + ii] = a[ii] * db[jj] * 2.0 / hy;
    }
  const double la[2] = {0.5 * (1 - s), 0.5 * (1 + s)}, lb[2] = {0.5 * (1 - t), 0.5 * (1 + t)};
  for (int jj = 0; jj < 2; ++jj)
    for (int ii = 0; ii < 2; ++ii) {
      const int k = 2 * jj + ii;
      p.N1[k] = la[ii] * lb[jj];
      p.dx1[k] = (ii ? 0.5 : -0.5) * lb[jj] * 2.0 / hx;
      p.dy1[k] = la[ii] * (jj ? 0.5 : -0.5) * 2.0 / hy;
    }
  return p;
}

double proj(double g, double beta, double xi) {
  return (std::tanh(beta * xi) + std::tanh(beta * (g - xi))) / (std::tanh(beta * xi) + std::tanh(beta * (1 - xi)));
}
double dproj(double g, double beta, double xi) {
  const double c = std::cosh(beta * (g - xi));
  return beta / (c * c) / (std::tanh(beta * xi) + std::tanh(beta * (1 - xi)));
}
double alpha_of(double gp, const PlaneParams& P) {
  return P.alpha_f + (P.alpha_s - P.alpha_f) * P.q * (1 - gp) / (P.q + gp);
}
double dalpha(double gp, const PlaneParams& P) {
  return -(P.alpha_s - P.alpha_f) * P.q * (P.q + 1) / ((P.q + gp) * (P.q + gp));
}

struct FilterSystem {
  Sp K, B;  // K gamma_f = B gamma
};

FilterSystem filter_system(const BaseManifoldMesh& m, double r) {
  const int n1 = m.num_q1();
  std::vector<Trip> tk, tb;
  for (const Element& el : m.elements) {
    const Rect rc = rect_of(m, el);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const Pt p = point(rc, i, j);
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            const double mass = p.w * p.N1[a] * p.N1[b];
            tk.emplace_back(el.q1[a], el.q1[b], p.w * r * r * (p.dx1[a] * p.dx1[b] + p.dy1[a] * p.dy1[b]) + mass);
            tb.emplace_back(el.q1[a], el.q1[b], mass);
          }
      }
  }
  FilterSystem f;
  f.K.resize(n1, n1);
  f.B.resize(n1, n1);
  f.K.setFromTriplets(tk.begin(), tk.end());
  f.B.setFromTriplets(tb.begin(), tb.end());
  return f;
}

}  // namespace

VecX plane_filter(const BaseManifoldMesh& mesh, const VecX& gamma, double r_f) {
  const FilterSystem f = filter_system(mesh, r_f);
  Eigen::SimplicialLDLT<Sp> ldlt(f.K);
  return ldlt.solve(f.B * gamma);
}

PlaneResult plane_step(const BaseManifoldMesh& m, const VecX& gamma, const PlaneParams& P) {
  const int n2 = m.num_q2(), n1 = m.num_q1(), ne = m.num_elements();
  const int N = 2 * n2 + n1;
  auto ux = [](int i) { return 2 * i; };
  auto uy = [](int i) { return 2 * i + 1; };
  auto pp = [n2](int k) { return 2 * n2 + k; };

  PlaneResult out;
  const FilterSystem fs = filter_system(m, P.r_f);
  Eigen::SimplicialLDLT<Sp> fsolve(fs.K);
  out.gamma_f = fsolve.solve(fs.B * gamma);

  // per Gauss point gamma_p and alpha
  std::vector<double> gp(ne * 9), al(ne * 9), dgp(ne * 9);
  for (int e = 0; e < ne; ++e) {
    const Element& el = m.elements[e];
    for (int k = 0; k < 9; ++k) {
      const Pt p = point(rect_of(m, el), k % 3, k / 3);
      double g = 0;
      for (int a = 0; a < 4; ++a) g += p.N1[a] * out.gamma_f[el.q1[a]];
      gp[e * 9 + k] = el.fluid ? 1.0 : proj(g, P.beta, P.xi);
      dgp[e * 9 + k] = el.fluid ? 0.0 : dproj(g, P.beta, P.xi);
      al[e * 9 + k] = alpha_of(gp[e * 9 + k], P);
    }
  }

  // Dirichlet data: parabola on the inlet, zero on walls
  std::vector<char> fixed(N, 0);
  VecX U = VecX::Zero(N);
  for (const BoundarySegment& s : m.segments) {
    if (s.tag == BoundaryTag::Open) continue;
    double lo = 1e300, hi = -1e300;
    bool vertical = true;
    for (int e : s.edges)
      for (int k : m.edges[e].q2) {
        lo = std::min(lo, m.nodes[k][1]);
        hi = std::max(hi, m.nodes[k][1]);
        vertical = vertical && std::abs(m.nodes[k][0] - m.nodes[m.edges[s.edges[0]].q2[0]][0]) < 1e-12;
      }
    for (int e : s.edges)
      for (int k : m.edges[e].q2) {
        fixed[ux(k)] = fixed[uy(k)] = 1;
        if (s.tag == BoundaryTag::Inlet) {
          if (!vertical) throw std::runtime_error("plane oracle expects a vertical inlet");
          const double z = (m.nodes[k][1] - lo) / (hi - lo);
          U[ux(k)] = P.U0 * 4 * z * (1 - z);
        }
      }
  }
  for (const PinPoint& pin : m.pins) {
    fixed[pp(pin.q1_node)] = 1;
    U[pp(pin.q1_node)] = pin.value;
  }
  std::vector<int> fmap(N, -1), free;
  for (int i = 0; i < N; ++i)
    if (!fixed[i]) {
      fmap[i] = static_cast<int>(free.size());
      free.push_back(i);
    }
  const int nf = static_cast<int>(free.size());

  // local index helpers: 18 velocity (2 per Q2 node) + 4 pressure
  auto local = [&](const Element& el) {
    std::array<int, 22> ix{};
    for (int a = 0; a < 9; ++a) {
      ix[2 * a] = ux(el.q2[a]);
      ix[2 * a + 1] = uy(el.q2[a]);
    }
    for (int b = 0; b < 4; ++b) ix[18 + b] = pp(el.q1[b]);
    return ix;
  };

  auto assemble = [&](const VecX& X, VecX& R, Sp* K) {
    R = VecX::Zero(N);
    std::vector<Trip> t;
    for (int e = 0; e < ne; ++e) {
      const Element& el = m.elements[e];
      const Rect rc = rect_of(m, el);
      const auto ix = local(el);
      double Re[22] = {0};
      double Ke[22][22] = {{0}};
      for (int k = 0; k < 9; ++k) {
        const Pt p = point(rc, k % 3, k / 3);
        const double a = al[e * 9 + k];
        double u[2] = {0, 0}, G[2][2] = {{0, 0}, {0, 0}}, pr = 0;  // G[i][j] = d_i u_j
        for (int n = 0; n < 9; ++n) {
          const double v[2] = {X[ix[2 * n]], X[ix[2 * n + 1]]};
          const double d[2] = {p.dx2[n], p.dy2[n]};
          for (int j = 0; j < 2; ++j) {
            u[j] += p.N2[n] * v[j];
            for (int i = 0; i < 2; ++i) G[i][j] += d[i] * v[j];
          }
        }
        for (int b = 0; b < 4; ++b) pr += p.N1[b] * X[ix[18 + b]];
        const double div = G[0][0] + G[1][1];
        for (int n = 0; n < 9; ++n) {
          const double d[2] = {p.dx2[n], p.dy2[n]};
          for (int j = 0; j < 2; ++j) {
            double conv = 0, visc = 0;
            for (int i = 0; i < 2; ++i) {
              conv += u[i] * G[i][j];
              visc += (G[i][j] + G[j][i]) * d[i];
            }
            Re[2 * n + j] += p.w * (P.rho * conv * p.N2[n] + P.eta * visc - pr * d[j] + a * u[j] * p.N2[n]);
          }
        }
        for (int b = 0; b < 4; ++b) Re[18 + b] -= p.w * p.N1[b] * div;
        if (!K) continue;
        for (int n = 0; n < 9; ++n) {
          const double dn[2] = {p.dx2[n], p.dy2[n]};
          for (int c = 0; c < 9; ++c) {
            const double dc[2] = {p.dx2[c], p.dy2[c]};
            const double udc = u[0] * dc[0] + u[1] * dc[1];
            const double dd = dn[0] * dc[0] + dn[1] * dc[1];
            for (int j = 0; j < 2; ++j)
              for (int l = 0; l < 2; ++l) {
                double v = P.rho * p.N2[n] * p.N2[c] * G[l][j] + P.eta * dc[j] * dn[l];
                if (j == l) v += P.rho * p.N2[n] * udc + P.eta * dd + a * p.N2[n] * p.N2[c];
                Ke[2 * n + j][2 * c + l] += p.w * v;
              }
          }
          for (int b = 0; b < 4; ++b)
            for (int j = 0; j < 2; ++j) {
              Ke[2 * n + j][18 + b] -= p.w * p.N1[b] * dn[j];
              Ke[18 + b][2 * n + j] -= p.w * p.N1[b] * dn[j];
            }
        }
      }
      for (int r = 0; r < 22; ++r) {
        R[ix[r]] += Re[r];
        if (K && fmap[ix[r]] >= 0)
          for (int c = 0; c < 22; ++c)
            if (fmap[ix[c]] >= 0) t.emplace_back(fmap[ix[r]], fmap[ix[c]], Ke[r][c]);
      }
    }
    if (K) {
      K->resize(nf, nf);
      K->setFromTriplets(t.begin(), t.end());
    }
  };

  auto restrict_free = [&](const VecX& R) {
    VecX r(nf);
    for (int i = 0; i < nf; ++i) r[i] = R[free[i]];
    return r;
  };

  VecX R;
  Sp K;
  assemble(U, R, nullptr);
  const double tol = std::max(1e-11 * restrict_free(R).norm(), 1e-13);
  int polish = 0;
  for (int it = 0; it < 60; ++it) {
    assemble(U, R, &K);
    const VecX rf = restrict_free(R);
    if (rf.norm() <= tol && ++polish > 2) break;
    Eigen::SparseLU<Sp> lu(K);
    const VecX dx = lu.solve(-rf);
    for (int i = 0; i < nf; ++i) U[free[i]] += dx[i];
    ++out.newton_iters;
  }

  // objective and dJ/dU
  VecX dJ = VecX::Zero(N);
  std::vector<double> dJ_dgp(ne * 9, 0.0);
  for (int e = 0; e < ne; ++e) {
    const Element& el = m.elements[e];
    const Rect rc = rect_of(m, el);
    const auto ix = local(el);
    for (int k = 0; k < 9; ++k) {
      const Pt p = point(rc, k % 3, k / 3);
      double u[2] = {0, 0}, G[2][2] = {{0, 0}, {0, 0}};
      for (int n = 0; n < 9; ++n) {
        const double v[2] = {U[ix[2 * n]], U[ix[2 * n + 1]]};
        const double d[2] = {p.dx2[n], p.dy2[n]};
        for (int j = 0; j < 2; ++j) {
          u[j] += p.N2[n] * v[j];
          for (int i = 0; i < 2; ++i) G[i][j] += d[i] * v[j];
        }
      }
      double SS = 0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) SS += (G[i][j] + G[j][i]) * (G[i][j] + G[j][i]);
      const double uu = u[0] * u[0] + u[1] * u[1];
      out.J += P.omega * p.w * (0.5 * P.eta * SS + al[e * 9 + k] * uu);
      dJ_dgp[e * 9 + k] += P.omega * p.w * dalpha(gp[e * 9 + k], P) * uu;
      for (int n = 0; n < 9; ++n) {
        const double d[2] = {p.dx2[n], p.dy2[n]};
        for (int j = 0; j < 2; ++j) {
          double s = 0;
          for (int i = 0; i < 2; ++i) s += (G[i][j] + G[j][i]) * d[i];
          dJ[ix[2 * n + j]] += P.omega * p.w * (2 * P.eta * s + 2 * al[e * 9 + k] * u[j] * p.N2[n]);
        }
      }
    }
  }
  for (size_t b = 0; b < m.edges.size(); ++b) {
    const BoundaryEdge& be = m.edges[b];
    const BoundaryTag tag = m.segments[be.segment].tag;
    if (tag == BoundaryTag::Wall) continue;
    const double sign = tag == BoundaryTag::Inlet ? 1.0 : -1.0;
    const Vec3 a = m.nodes[be.q2[0]], c = m.nodes[be.q2[2]];
    const double len = (c - a).norm();
    const int k0 = be.q1[0], k1 = be.q1[1];
    for (int q = 0; q < 3; ++q) {
      const double s = 0.5 * (kG[q] + 1.0);
      const double w = 0.5 * kW[q] * len;
      const double pr = (1 - s) * U[pp(k0)] + s * U[pp(k1)];
      out.J += (1 - P.omega) * sign * w * pr;
      dJ[pp(k0)] += (1 - P.omega) * sign * w * (1 - s);
      dJ[pp(k1)] += (1 - P.omega) * sign * w * s;
    }
  }

  // discrete adjoint: K^T lambda = -dJ/dU on free unknowns
  assemble(U, R, &K);
  Eigen::SparseLU<Sp> lu;
  const Sp Kt = K.transpose();
  lu.compute(Kt);
  const VecX lam_f = lu.solve(-restrict_free(dJ));
  VecX lam = VecX::Zero(N);
  for (int i = 0; i < nf; ++i) lam[free[i]] = lam_f[i];

  // dJ/dgamma_p at Gauss points: explicit part + lambda^T dR/dalpha dalpha/dgamma_p
  VecX dJ_dgf = VecX::Zero(n1);
  for (int e = 0; e < ne; ++e) {
    const Element& el = m.elements[e];
    const Rect rc = rect_of(m, el);
    const auto ix = local(el);
    for (int k = 0; k < 9; ++k) {
      const Pt p = point(rc, k % 3, k / 3);
      double u[2] = {0, 0}, l[2] = {0, 0};
      for (int n = 0; n < 9; ++n)
        for (int j = 0; j < 2; ++j) {
          u[j] += p.N2[n] * U[ix[2 * n + j]];
          l[j] += p.N2[n] * lam[ix[2 * n + j]];
        }
      const double total =
          dJ_dgp[e * 9 + k] + p.w * dalpha(gp[e * 9 + k], P) * (u[0] * l[0] + u[1] * l[1]);
      for (int a = 0; a < 4; ++a) dJ_dgf[el.q1[a]] += total * dgp[e * 9 + k] * p.N1[a];
    }
  }
  // gamma_f = K^-1 B gamma  =>  dJ/dgamma = B^T K^-T dJ/dgamma_f
  out.dJ_dgamma = fs.B.transpose() * fsolve.solve(dJ_dgf);

  out.ux.resize(n2);
  out.uy.resize(n2);
  out.p.resize(n1);
  for (int i = 0; i < n2; ++i) {
    out.ux[i] = U[ux(i)];
    out.uy[i] = U[uy(i)];
  }
  for (int k = 0; k < n1; ++k) out.p[k] = U[pp(k)];
  return out;
}

}  // namespace mto::oracle
