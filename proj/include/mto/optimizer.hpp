#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mto/adjoint.hpp"
#include "mto/fields.hpp"
#include "mto/flow.hpp"
#include "mto/mesh.hpp"
#include "mto/mma.hpp"

namespace mto {

struct ProblemConfig {
  CaseSpec case_spec;
  FluidParams fluid;
  FilterParams filter;      // r_f, r_m as fractions of the characteristic length
  MaterialParams material;
  SolverOptions solver;
  double omega = 0.9;
  double eps0 = kDefaultEps0;
};

// One pass through the forward chain at a design.
struct Evaluation {
  DesignState design;
  std::shared_ptr<const GeometricFactors> gf;  // heap-held: ctx and pattern point into it
  std::shared_ptr<PatternFilter> pattern;
  FlowContext ctx;
  FlowState flow;
  ObjectiveParts obj;
  AreaResult area;
  double v = 0.0;
  bool has_flow = false;
};

struct Gradients {
  Eigen::VectorXd dJ, ds, dv;  // design-vector layout
  AdjointState adjoint;
};

// Design vector layout: pattern values on design Q1 nodes, then d_m on all Q2 nodes.
class Problem {
 public:
  Problem(BaseManifoldMesh mesh, ProblemConfig cfg);
  Problem(const Problem&) = delete;
  Problem& operator=(const Problem&) = delete;

  const BaseManifoldMesh& mesh() const { return mesh_; }
  const ProblemConfig& config() const { return cfg_; }
  void set_beta(double beta) { cfg_.filter.beta = beta; }
  double r_f() const { return cfg_.filter.r_f * mesh_.characteristic_length; }
  double r_m() const { return cfg_.filter.r_m * mesh_.characteristic_length; }

  const std::vector<int>& gamma_nodes() const { return gamma_nodes_; }
  int num_gamma() const { return static_cast<int>(gamma_nodes_.size()); }
  int num_design() const { return num_gamma() + mesh_.num_q2(); }
  VecX gamma_full(const VecX& x) const;
  VecX d_m(const VecX& x) const;
  VecX initial_design(double s0, double v0) const;

  Evaluation evaluate(const VecX& x, bool with_flow = true, const FlowState* warm = nullptr) const;
  ForwardView view(const Evaluation& ev) const;
  Gradients gradients(const Evaluation& ev, bool objective = true) const;

  const FlowSolver& flow_solver() const { return *flow_; }
  const ManifoldFilter& manifold_filter() const { return *manifold_; }

 private:
  VecX pack(const SensitivityVector& s) const;
  BaseManifoldMesh mesh_;
  ProblemConfig cfg_;
  std::vector<int> gamma_nodes_;
  std::unique_ptr<FlowSolver> flow_;
  std::unique_ptr<ManifoldFilter> manifold_;
};

struct OptimizationConfig {
  double s0 = 0.3;
  double v0 = 0.0;
  int n_max = 240;
  double beta_init = 1.0;
  double beta_max = 128.0;
  int beta_interval = 30;
  double stall_tol = 1e-3;
  int stall_window = 5;
  double volume_tol = 1e-3;
  MMAParams mma;
};

struct IterationRecord {
  int iter = 0;
  double J = 0.0, Jn = 0.0, s = 0.0, v = 0.0, beta = 1.0;
  double g_area = 0.0, g_vol_hi = 0.0, g_vol_lo = 0.0;
  int newton_iters = 0;
};

enum class StopReason { None, Converged, MaxIterations };
std::string to_string(StopReason r);

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::None;
  double beta = 1.0;  // beta for the next iteration
};

// history holds the records up to and including `iter`.
StopDecision continuation_and_stop(const std::vector<IterationRecord>& history, int iter, double beta,
                                   const OptimizationConfig& cfg);

// Scaled constraints g1 = s - s0, g2 = v - v0 - tol, g3 = v0 - v - tol.
Eigen::Vector3d constraint_values(double s, double v, const OptimizationConfig& cfg);

// One MMA step on x given the evaluated responses.
void mma_update(MMA& mma, VecX& x, double Jn, const VecX& dJn, double s, const VecX& ds, double v,
                const VecX& dv, const OptimizationConfig& cfg);

struct LoopResult {
  VecX x;  // design evaluated at the final iteration
  Evaluation final_eval;
  std::vector<IterationRecord> history;
  StopReason reason = StopReason::None;
};

struct LoopCallbacks {
  std::function<void(const IterationRecord&, const Evaluation&, const VecX&)> on_iteration;
  std::function<void(int iter, double new_beta, const Evaluation&, const VecX&)> on_beta_change;
  std::function<void(int iter, const VecX&)> on_failure;  // before a solver error propagates
};

LoopResult run_loop(Problem& problem, const OptimizationConfig& cfg, const LoopCallbacks& cb = {});

}  // namespace mto

namespace mto {

struct GradcheckRow {
  std::string response;  // J, s, v
  std::string variable;  // gamma, d_m
  int direction = 0;
  double analytic = 0.0, fd = 0.0, rel_err = 0.0;
};

// Central differences with full re-solves along random unit directions,
// restricted to one design field at a time.
std::vector<GradcheckRow> gradient_check(const Problem& problem, const VecX& x, int directions, double h,
                                         unsigned seed);

}  // namespace mto
