#pragma once

#include <Eigen/Dense>

namespace mto {

struct MMAParams {
  double move = 0.2;
  double asyinit = 0.5;
  double asydecr = 0.7;
  double asyincr = 1.2;
  double asymin = 1e-4;  // closest asymptote distance, fraction of the box
  double albefa = 0.1;
  double raa0 = 1e-5;
  double epsimin = 1e-12;
  double a0 = 1.0;
  double c = 1000.0;
  double d = 1.0;
};

// Method of moving asymptotes for
//   min f0(x)  s.t.  g_i(x) <= 0,  xmin <= x <= xmax.
class MMA {
 public:
  MMA(int n, int m, const MMAParams& p = {});

  // One outer update of x in place. dg is m x n.
  void update(Eigen::VectorXd& x, const Eigen::VectorXd& xmin, const Eigen::VectorXd& xmax, double f0,
              const Eigen::VectorXd& df0, const Eigen::VectorXd& g, const Eigen::MatrixXd& dg);

  int iterations() const { return iter_; }
  // Maximum KKT residual reached by the last subproblem solve.
  double last_kkt() const { return kkt_; }
  const Eigen::VectorXd& low() const { return low_; }
  const Eigen::VectorXd& upp() const { return upp_; }

 private:
  int n_, m_;
  MMAParams p_;
  int iter_ = 0;
  double kkt_ = 0.0;
  Eigen::VectorXd xold1_, xold2_, low_, upp_;
};

}  // namespace mto
