#include "mto/optimizer.hpp"

#include <cmath>
#include <random>

namespace mto {

Problem::Problem(BaseManifoldMesh mesh, ProblemConfig cfg) : mesh_(std::move(mesh)), cfg_(std::move(cfg)) {
  cfg_.filter.validate();
  gamma_nodes_ = design_gamma_nodes(mesh_);
  flow_ = std::make_unique<FlowSolver>(mesh_);
  manifold_ = std::make_unique<ManifoldFilter>(mesh_, r_m());
}

VecX Problem::gamma_full(const VecX& x) const {
  VecX g = VecX::Ones(mesh_.num_q1());
  for (int i = 0; i < num_gamma(); ++i) g[gamma_nodes_[i]] = x[i];
  return g;
}

VecX Problem::d_m(const VecX& x) const { return x.tail(mesh_.num_q2()); }

VecX Problem::initial_design(double s0, double v0) const {
  VecX x(num_design());
  x.head(num_gamma()).setConstant(s0);
  x.tail(mesh_.num_q2()).setConstant(v0 + 0.5);
  return x;
}

Evaluation Problem::evaluate(const VecX& x, bool with_flow, const FlowState* warm) const {
  if (x.size() != num_design()) throw Error("Problem::evaluate: design size mismatch");
  Evaluation ev;
  DesignState& ds = ev.design;
  ds.gamma = gamma_full(x);
  ds.d_m = d_m(x);
  ds.d_f = manifold_->apply(ds.d_m, cfg_.filter.A_d);
  ev.v = evaluate_volume(ds.d_f, mesh_);
  auto gf = std::make_shared<GeometricFactors>(compute_geometric_factors(mesh_, ds.d_f, cfg_.eps0));
  ev.gf = gf;
  ev.pattern = std::make_shared<PatternFilter>(mesh_, *gf, r_f());
  ds.gamma_f = ev.pattern->apply(ds.gamma);
  project_density(mesh_, ds.gamma_f, cfg_.filter.beta, cfg_.filter.xi, ds.gamma_p, ds.dgamma_p);
  ev.area = evaluate_area(mesh_, *gf, ds.gamma_p);
  ev.ctx = make_flow_context(mesh_, *gf, ds.gamma_p, cfg_.fluid, cfg_.material, cfg_.solver.lambda_sign);
  if (with_flow) {
    ev.flow = flow_->solve(ev.ctx, cfg_.solver, warm);
    ev.obj = evaluate_objective(ev.ctx, flow_->dofs(), ev.flow.U, cfg_.omega);
    ev.has_flow = true;
  }
  return ev;
}

ForwardView Problem::view(const Evaluation& ev) const {
  ForwardView fw;
  fw.mesh = &mesh_;
  fw.gf = ev.gf.get();
  fw.design = &ev.design;
  fw.ctx = &ev.ctx;
  fw.solver = flow_.get();
  fw.pattern = ev.pattern.get();
  fw.manifold = manifold_.get();
  fw.U = ev.has_flow ? &ev.flow.U : nullptr;
  fw.material = cfg_.material;
  fw.filter = cfg_.filter;
  fw.filter.r_f = r_f();
  fw.filter.r_m = r_m();
  fw.omega = cfg_.omega;
  return fw;
}

VecX Problem::pack(const SensitivityVector& s) const {
  VecX g(num_design());
  for (int i = 0; i < num_gamma(); ++i) g[i] = s.wrt_gamma[gamma_nodes_[i]];
  g.tail(mesh_.num_q2()) = s.wrt_dm;
  return g;
}

Gradients Problem::gradients(const Evaluation& ev, bool objective) const {
  Gradients gr;
  const ForwardView fw = view(ev);
  if (objective) {
    if (!ev.has_flow) throw Error("Problem::gradients: objective requires a flow solution");
    gr.dJ = pack(sensitivity_objective(fw, &gr.adjoint));
  }
  gr.ds = pack(sensitivity_area(fw));
  gr.dv = pack(sensitivity_volume(mesh_, *manifold_, cfg_.filter.A_d));
  return gr;
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::MaxIterations: return "max_iterations";
    default: return "none";
  }
}

StopDecision continuation_and_stop(const std::vector<IterationRecord>& h, int iter, double beta,
                                   const OptimizationConfig& cfg) {
  StopDecision d;
  d.beta = beta;
  if (cfg.beta_interval > 0 && iter % cfg.beta_interval == 0 && beta < cfg.beta_max)
    d.beta = std::min(2.0 * beta, cfg.beta_max);
  if (iter >= cfg.n_max) {
    d.stop = true;
    d.reason = StopReason::MaxIterations;
    return d;
  }
  const int w = cfg.stall_window;
  if (d.beta == cfg.beta_max && static_cast<int>(h.size()) >= w + 1 && !h.empty()) {
    const double J0 = h.front().J;
    double stall = 0.0;
    const int n = static_cast<int>(h.size());
    for (int m = 0; m < w; ++m) stall += std::abs(h[n - 1 - m].J - h[n - 2 - m].J);
    stall /= w * std::abs(J0);
    const IterationRecord& last = h.back();
    if (stall <= cfg.stall_tol && last.s <= cfg.s0 && std::abs(last.v - cfg.v0) <= cfg.volume_tol) {
      d.stop = true;
      d.reason = StopReason::Converged;
    }
  }
  return d;
}

Eigen::Vector3d constraint_values(double s, double v, const OptimizationConfig& cfg) {
  return Eigen::Vector3d(s - cfg.s0, v - cfg.v0 - cfg.volume_tol, cfg.v0 - v - cfg.volume_tol);
}

void mma_update(MMA& mma, VecX& x, double Jn, const VecX& dJn, double s, const VecX& ds, double v,
                const VecX& dv, const OptimizationConfig& cfg) {
  const int n = static_cast<int>(x.size());
  const Eigen::Vector3d g = constraint_values(s, v, cfg);
  Eigen::MatrixXd dg(3, n);
  dg.row(0) = ds.transpose();
  dg.row(1) = dv.transpose();
  dg.row(2) = -dv.transpose();
  mma.update(x, VecX::Zero(n), VecX::Ones(n), Jn, dJn, g, dg);
  x = x.cwiseMax(0.0).cwiseMin(1.0);
}

LoopResult run_loop(Problem& problem, const OptimizationConfig& cfg, const LoopCallbacks& cb) {
  LoopResult res;
  VecX x = problem.initial_design(cfg.s0, cfg.v0);
  double beta = cfg.beta_init;
  MMA mma(problem.num_design(), 3, cfg.mma);
  FlowState warm;
  bool have_warm = false;
  double J0 = 0.0;
  for (int iter = 1;; ++iter) {
    problem.set_beta(beta);
    Evaluation ev;
    Gradients gr;
    try {
      ev = problem.evaluate(x, true, have_warm ? &warm : nullptr);
      gr = problem.gradients(ev);
    } catch (const Error&) {
      if (cb.on_failure) cb.on_failure(iter, x);
      throw;
    }
    warm = ev.flow;
    have_warm = true;
    if (iter == 1) J0 = ev.obj.J;
    IterationRecord rec;
    rec.iter = iter;
    rec.J = ev.obj.J;
    rec.Jn = ev.obj.J / J0;
    rec.s = ev.area.s;
    rec.v = ev.v;
    rec.beta = beta;
    const Eigen::Vector3d g = constraint_values(rec.s, rec.v, cfg);
    rec.g_area = g[0];
    rec.g_vol_hi = g[1];
    rec.g_vol_lo = g[2];
    rec.newton_iters = ev.flow.newton_iters;
    res.history.push_back(rec);
    if (cb.on_iteration) cb.on_iteration(rec, ev, x);

    VecX xn = x;
    mma_update(mma, xn, rec.Jn, gr.dJ / J0, rec.s, gr.ds, rec.v, gr.dv, cfg);

    const StopDecision d = continuation_and_stop(res.history, iter, beta, cfg);
    if (d.stop) {
      res.x = x;
      res.final_eval = std::move(ev);
      res.reason = d.reason;
      return res;
    }
    if (d.beta != beta && cb.on_beta_change) cb.on_beta_change(iter, d.beta, ev, xn);
    beta = d.beta;
    x = std::move(xn);
  }
}

std::vector<GradcheckRow> gradient_check(const Problem& problem, const VecX& x, int directions, double h,
                                         unsigned seed) {
  const Evaluation ev = problem.evaluate(x);
  const Gradients gr = problem.gradients(ev);
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<GradcheckRow> rows;
  const int ng = problem.num_gamma(), nd = problem.num_design();
  for (int var = 0; var < 2; ++var) {
    const int lo = var == 0 ? 0 : ng, hi = var == 0 ? ng : nd;
    for (int k = 0; k < directions; ++k) {
      VecX dir = VecX::Zero(nd);
      for (int i = lo; i < hi; ++i) dir[i] = normal(rng);
      if (dir.norm() > 0.0) dir /= dir.norm();
      const Evaluation ep = problem.evaluate(x + h * dir, true, &ev.flow);
      const Evaluation em = problem.evaluate(x - h * dir, true, &ev.flow);
      const double fd[3] = {(ep.obj.J - em.obj.J) / (2 * h), (ep.area.s - em.area.s) / (2 * h),
                            (ep.v - em.v) / (2 * h)};
      const double an[3] = {gr.dJ.dot(dir), gr.ds.dot(dir), gr.dv.dot(dir)};
      const char* names[3] = {"J", "s", "v"};
      for (int r = 0; r < 3; ++r) {
        GradcheckRow row;
        row.response = names[r];
        row.variable = var == 0 ? "gamma" : "d_m";
        row.direction = k;
        row.analytic = an[r];
        row.fd = fd[r];
        const double scale = std::max(std::abs(an[r]), std::abs(fd[r]));
        row.rel_err = scale > 0.0 ? std::abs(an[r] - fd[r]) / scale : 0.0;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace mto
