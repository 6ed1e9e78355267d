#include "mto/mma.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mto {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Sub {
  VectorXd x, y, lam, xsi, eta, mu, s;
  double z = 1, zet = 1;
};

// Primal-dual interior point solve of the MMA subproblem.
double subsolv(int m, int n, double epsimin, const VectorXd& low, const VectorXd& upp, const VectorXd& alfa,
               const VectorXd& beta, const VectorXd& p0, const VectorXd& q0, const MatrixXd& P,
               const MatrixXd& Q, double a0, const VectorXd& a, const VectorXd& b, const VectorXd& c,
               const VectorXd& d, Sub& out) {
  const VectorXd een = VectorXd::Ones(n), eem = VectorXd::Ones(m);
  double epsi = 1.0;
  VectorXd x = 0.5 * (alfa + beta);
  VectorXd y = eem, lam = eem;
  double z = 1.0, zet = 1.0;
  VectorXd xsi = (een.array() / (x - alfa).array()).max(1.0);
  VectorXd eta = (een.array() / (beta - x).array()).max(1.0);
  VectorXd mu = (0.5 * c).cwiseMax(eem);
  VectorXd s = eem;
  double resmax_final = 0.0;

  auto residual = [&](const VectorXd& x, const VectorXd& y, double z, const VectorXd& lam,
                      const VectorXd& xsi, const VectorXd& eta, const VectorXd& mu, double zet,
                      const VectorXd& s, double epsi, double* rmax) {
    const VectorXd ux1 = upp - x, xl1 = x - low;
    const VectorXd plam = p0 + P.transpose() * lam, qlam = q0 + Q.transpose() * lam;
    const VectorXd gvec = P * ux1.cwiseInverse() + Q * xl1.cwiseInverse();
    const VectorXd dpsidx = plam.cwiseQuotient(ux1.cwiseProduct(ux1)) - qlam.cwiseQuotient(xl1.cwiseProduct(xl1));
    VectorXd r(3 * n + 4 * m + 2);
    int k = 0;
    r.segment(k, n) = dpsidx - xsi + eta; k += n;
    r.segment(k, m) = c + d.cwiseProduct(y) - mu - lam; k += m;
    r[k++] = a0 - zet - a.dot(lam);
    r.segment(k, m) = gvec - a * z - y + s - b; k += m;
    r.segment(k, n) = xsi.cwiseProduct(x - alfa) - epsi * een; k += n;
    r.segment(k, n) = eta.cwiseProduct(beta - x) - epsi * een; k += n;
    r.segment(k, m) = mu.cwiseProduct(y) - epsi * eem; k += m;
    r[k++] = zet * z - epsi;
    r.segment(k, m) = lam.cwiseProduct(s) - epsi * eem;
    if (rmax) *rmax = r.cwiseAbs().maxCoeff();
    return r.norm();
  };

  while (epsi > epsimin) {
    double resmax = 0.0;
    double resnorm = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi, &resmax);
    int ittt = 0;
    while (resmax > 0.9 * epsi && ittt < 200) {
      ++ittt;
      const VectorXd ux1 = upp - x, xl1 = x - low;
      const VectorXd ux2 = ux1.cwiseProduct(ux1), xl2 = xl1.cwiseProduct(xl1);
      const VectorXd ux3 = ux1.cwiseProduct(ux2), xl3 = xl1.cwiseProduct(xl2);
      const VectorXd uxinv1 = ux1.cwiseInverse(), xlinv1 = xl1.cwiseInverse();
      const VectorXd uxinv2 = ux2.cwiseInverse(), xlinv2 = xl2.cwiseInverse();
      const VectorXd plam = p0 + P.transpose() * lam, qlam = q0 + Q.transpose() * lam;
      const VectorXd gvec = P * uxinv1 + Q * xlinv1;
      const MatrixXd GG = P * uxinv2.asDiagonal() - Q * xlinv2.asDiagonal();
      const VectorXd dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);
      const VectorXd delx = dpsidx - epsi * (x - alfa).cwiseInverse() + epsi * (beta - x).cwiseInverse();
      const VectorXd dely = c + d.cwiseProduct(y) - lam - epsi * y.cwiseInverse();
      const double delz = a0 - a.dot(lam) - epsi / z;
      const VectorXd dellam = gvec - a * z - y - b + epsi * lam.cwiseInverse();
      VectorXd diagx = plam.cwiseQuotient(ux3) + qlam.cwiseQuotient(xl3);
      diagx = 2.0 * diagx + xsi.cwiseQuotient(x - alfa) + eta.cwiseQuotient(beta - x);
      const VectorXd diagxinv = diagx.cwiseInverse();
      const VectorXd diagy = d + mu.cwiseQuotient(y);
      const VectorXd diagyinv = diagy.cwiseInverse();
      const VectorXd diaglam = s.cwiseQuotient(lam);
      const VectorXd diaglamyi = diaglam + diagyinv;
      VectorXd dx, dlam;
      double dz;
      if (m < n) {
        const VectorXd blam = dellam + dely.cwiseQuotient(diagy) - GG * delx.cwiseQuotient(diagx);
        MatrixXd AA(m + 1, m + 1);
        AA.topLeftCorner(m, m) = MatrixXd(diaglamyi.asDiagonal()) + GG * diagxinv.asDiagonal() * GG.transpose();
        AA.topRightCorner(m, 1) = a;
        AA.bottomLeftCorner(1, m) = a.transpose();
        AA(m, m) = -zet / z;
        VectorXd bb(m + 1);
        bb.head(m) = blam;
        bb[m] = delz;
        const VectorXd sol = AA.partialPivLu().solve(bb);
        dlam = sol.head(m);
        dz = sol[m];
        dx = -delx.cwiseQuotient(diagx) - (GG.transpose() * dlam).cwiseQuotient(diagx);
      } else {
        const VectorXd diaglamyiinv = diaglamyi.cwiseInverse();
        const VectorXd dellamyi = dellam + dely.cwiseQuotient(diagy);
        MatrixXd AA(n + 1, n + 1);
        AA.topLeftCorner(n, n) = MatrixXd(diagx.asDiagonal()) + GG.transpose() * diaglamyiinv.asDiagonal() * GG;
        const VectorXd axz = -GG.transpose() * a.cwiseQuotient(diaglamyi);
        AA.topRightCorner(n, 1) = axz;
        AA.bottomLeftCorner(1, n) = axz.transpose();
        AA(n, n) = zet / z + a.dot(a.cwiseQuotient(diaglamyi));
        const VectorXd bx = delx + GG.transpose() * dellamyi.cwiseQuotient(diaglamyi);
        const double bz = delz - a.dot(dellamyi.cwiseQuotient(diaglamyi));
        VectorXd bb(n + 1);
        bb.head(n) = -bx;
        bb[n] = -bz;
        const VectorXd sol = AA.partialPivLu().solve(bb);
        dx = sol.head(n);
        dz = sol[n];
        dlam = (GG * dx).cwiseQuotient(diaglamyi) - dz * a.cwiseQuotient(diaglamyi) + dellamyi.cwiseQuotient(diaglamyi);
      }
      const VectorXd dy = -dely.cwiseQuotient(diagy) + dlam.cwiseQuotient(diagy);
      const VectorXd dxsi = -xsi + epsi * (x - alfa).cwiseInverse() - xsi.cwiseProduct(dx).cwiseQuotient(x - alfa);
      const VectorXd deta = -eta + epsi * (beta - x).cwiseInverse() + eta.cwiseProduct(dx).cwiseQuotient(beta - x);
      const VectorXd dmu = -mu + epsi * y.cwiseInverse() - mu.cwiseProduct(dy).cwiseQuotient(y);
      const double dzet = -zet + epsi / z - zet * dz / z;
      const VectorXd ds = -s + epsi * lam.cwiseInverse() - s.cwiseProduct(dlam).cwiseQuotient(lam);

      double stmxx = std::max(-1.01 * dz / z, -1.01 * dzet / zet);
      auto upd = [&](const VectorXd& v, const VectorXd& dv) {
        if (v.size()) stmxx = std::max(stmxx, (-1.01 * dv.cwiseQuotient(v)).maxCoeff());
      };
      upd(y, dy);
      upd(lam, dlam);
      upd(xsi, dxsi);
      upd(eta, deta);
      upd(mu, dmu);
      upd(s, ds);
      const double stmalfa = (-1.01 * dx.cwiseQuotient(x - alfa)).maxCoeff();
      const double stmbeta = (1.01 * dx.cwiseQuotient(beta - x)).maxCoeff();
      const double stminv = std::max({stmalfa, stmbeta, stmxx, 1.0});
      double steg = 1.0 / stminv;

      const VectorXd xold = x, yold = y, lamold = lam, xsiold = xsi, etaold = eta, muold = mu, sold = s;
      const double zold = z, zetold = zet;
      int itto = 0;
      double resinew = 2.0 * resnorm;
      while (resinew > resnorm && itto < 50) {
        ++itto;
        x = xold + steg * dx;
        y = yold + steg * dy;
        z = zold + steg * dz;
        lam = lamold + steg * dlam;
        xsi = xsiold + steg * dxsi;
        eta = etaold + steg * deta;
        mu = muold + steg * dmu;
        zet = zetold + steg * dzet;
        s = sold + steg * ds;
        resinew = residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi, &resmax);
        steg *= 0.5;
      }
      resnorm = resinew;
    }
    resmax_final = resmax;
    epsi *= 0.1;
  }
  out.x = x;
  out.y = y;
  out.z = z;
  out.lam = lam;
  out.xsi = xsi;
  out.eta = eta;
  out.mu = mu;
  out.zet = zet;
  out.s = s;
  return resmax_final;
}

}  // namespace

MMA::MMA(int n, int m, const MMAParams& p) : n_(n), m_(m), p_(p) {
  if (n < 1 || m < 0) throw std::invalid_argument("MMA: bad problem size");
}

void MMA::update(VectorXd& x, const VectorXd& xmin, const VectorXd& xmax, double f0, const VectorXd& df0,
                 const VectorXd& g, const MatrixXd& dg) {
  (void)f0;
  if (x.size() != n_ || df0.size() != n_ || g.size() != m_ || dg.rows() != m_ || dg.cols() != n_)
    throw std::invalid_argument("MMA::update: dimension mismatch");
  ++iter_;
  const VectorXd range = xmax - xmin;
  if (iter_ < 3) {
    low_ = x - p_.asyinit * range;
    upp_ = x + p_.asyinit * range;
  } else {
    for (int j = 0; j < n_; ++j) {
      const double zzz = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
      const double f = zzz > 0 ? p_.asyincr : (zzz < 0 ? p_.asydecr : 1.0);
      low_[j] = x[j] - f * (xold1_[j] - low_[j]);
      upp_[j] = x[j] + f * (upp_[j] - xold1_[j]);
      low_[j] = std::clamp(low_[j], x[j] - 10.0 * range[j], x[j] - p_.asymin * range[j]);
      upp_[j] = std::clamp(upp_[j], x[j] + p_.asymin * range[j], x[j] + 10.0 * range[j]);
    }
  }
  VectorXd alfa(n_), beta(n_);
  for (int j = 0; j < n_; ++j) {
    alfa[j] = std::max({low_[j] + p_.albefa * (x[j] - low_[j]), x[j] - p_.move * range[j], xmin[j]});
    beta[j] = std::min({upp_[j] - p_.albefa * (upp_[j] - x[j]), x[j] + p_.move * range[j], xmax[j]});
  }
  const VectorXd xmamiinv = range.cwiseMax(1e-5).cwiseInverse();
  const VectorXd ux1 = upp_ - x, xl1 = x - low_;
  const VectorXd ux2 = ux1.cwiseProduct(ux1), xl2 = xl1.cwiseProduct(xl1);
  VectorXd p0 = df0.cwiseMax(0.0), q0 = (-df0).cwiseMax(0.0);
  const VectorXd pq0 = 0.001 * (p0 + q0) + p_.raa0 * xmamiinv;
  p0 = (p0 + pq0).cwiseProduct(ux2);
  q0 = (q0 + pq0).cwiseProduct(xl2);
  MatrixXd P = dg.cwiseMax(0.0), Q = (-dg).cwiseMax(0.0);
  const MatrixXd PQ = 0.001 * (P + Q) + p_.raa0 * VectorXd::Ones(m_) * xmamiinv.transpose();
  P = (P + PQ) * ux2.asDiagonal();
  Q = (Q + PQ) * xl2.asDiagonal();
  const VectorXd b = P * ux1.cwiseInverse() + Q * xl1.cwiseInverse() - g;
  Sub sol;
  kkt_ = subsolv(m_, n_, p_.epsimin, low_, upp_, alfa, beta, p0, q0, P, Q, p_.a0, VectorXd::Zero(m_), b,
                 VectorXd::Constant(m_, p_.c), VectorXd::Constant(m_, p_.d), sol);
  xold2_ = iter_ >= 2 ? xold1_ : x;
  xold1_ = x;
  x = sol.x;
}

}  // namespace mto
