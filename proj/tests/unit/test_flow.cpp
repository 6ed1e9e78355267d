#include <cmath>

#include "doctest.h"
#include "mto/flow.hpp"
#include "support/problems.hpp"

using namespace mto;

TEST_CASE("zero inlet speed gives the homogeneous solution") {
  auto cfg = test::config("bending_channel", 12);
  cfg.fluid.U0 = 0.0;
  auto p = test::problem(cfg);
  const Evaluation ev = p->evaluate(p->initial_design(0.5, 0.0));
  CHECK(ev.flow.U.cwiseAbs().maxCoeff() == 0.0);
  CHECK(ev.obj.J == 0.0);
}

TEST_CASE("plane Poiseuille channel") {
  auto cfg = test::config("channel", 16);  // 64 x 16 elements, L = 4, H = 1
  auto p = test::problem(cfg);
  const BaseManifoldMesh& m = p->mesh();
  CHECK(m.num_elements() == 64 * 16);
  CHECK(p->num_gamma() == 0);
  const Evaluation ev = p->evaluate(p->initial_design(0.5, 0.0));
  const double L = 4.0, H = 1.0, U = 1.0, eta = 1.0;
  const double dp = 8.0 * eta * L * U / (H * H);
  const double diss = L * 16.0 * eta * U * U / 3.0 / H;
  INFO("pressure drop " << ev.obj.pressure_drop << " vs " << dp * H);
  CHECK(std::abs(ev.obj.pressure_drop / H - dp) <= 0.02 * dp);
  INFO("dissipation " << ev.obj.dissipation << " vs " << diss);
  CHECK(std::abs(ev.obj.dissipation - diss) <= 0.02 * diss);
  CHECK(ev.obj.darcy == 0.0);

  // mid-channel profile and zero transverse components
  const DofMap& d = p->flow_solver().dofs();
  int count = 0;
  for (int i = 0; i < m.num_q2(); ++i) {
    const Vec3& x = m.nodes[i];
    CHECK(std::abs(ev.flow.U[d.u(i, 2)]) < 1e-12);
    if (std::abs(x[0] - L / 2) > 1e-12) continue;
    const double exact = 4.0 * U * x[1] * (H - x[1]) / (H * H);
    CHECK(std::abs(ev.flow.U[d.u(i, 0)] - exact) <= 0.02 * U);
    CHECK(std::abs(ev.flow.U[d.u(i, 1)]) <= 0.02 * U);
    ++count;
  }
  CHECK(count == 33);
  CHECK(ev.flow.U.tail(d.n1).cwiseAbs().maxCoeff() < 1e-10);  // multiplier idle on flat sheet
}

TEST_CASE("objective is non-negative at omega = 1") {
  auto cfg = test::config("bending_channel", 12);
  cfg.omega = 1.0;
  auto p = test::problem(cfg);
  const Evaluation ev = p->evaluate(test::jittered(*p, 0.4, 0.0, 0.3, 2));
  CHECK(ev.obj.J >= 0.0);
  CHECK(ev.obj.dissipation >= 0.0);
  const VecX zero = VecX::Zero(p->flow_solver().dofs().num_full());
  CHECK(evaluate_objective(ev.ctx, p->flow_solver().dofs(), zero, 0.9).J == 0.0);
}

TEST_CASE("area fraction examples") {
  CaseSpec cs;
  cs.case_id = "channel";
  cs.resolution = 8;
  cs.params = {{"length", 1.0}, {"height", 1.0}};
  const BaseManifoldMesh sq = build_case(cs);
  const GeometricFactors gf = compute_geometric_factors(sq, VecX::Zero(sq.num_q2()));
  std::vector<double> ones(sq.qp.size(), 1.0), lin(sq.qp.size());
  for (size_t i = 0; i < sq.qp.size(); ++i) lin[i] = sq.qp[i].x[0];
  CHECK(std::abs(evaluate_area(sq, gf, ones).s - 1.0) < 1e-14);
  CHECK(std::abs(evaluate_area(sq, gf, lin).s - 0.5) < 1e-14);
  CHECK(std::abs(evaluate_area(sq, gf, ones).area_gamma - 1.0) < 1e-13);

  const BaseManifoldMesh bc = build_case(CaseSpec{});
  const GeometricFactors g2 = compute_geometric_factors(bc, VecX::Zero(bc.num_q2()));
  std::vector<double> gp, dgp;
  project_density(bc, VecX::Zero(bc.num_q1()), 1.0, 0.5, gp, dgp);
  const double f = 2 * 0.125 * 0.25 / (1.0 + 2 * 0.125 * 0.25);
  CHECK(std::abs(evaluate_area(bc, g2, gp).s - f) < 1e-12);
}

TEST_CASE("volume fraction examples") {
  CaseSpec cs;
  cs.case_id = "channel";
  cs.resolution = 8;
  cs.params = {{"length", 1.0}, {"height", 1.0}};
  const BaseManifoldMesh sq = build_case(cs);
  CHECK(evaluate_volume(VecX::Zero(sq.num_q2()), sq) == 0.0);
  const VecX df = filter_manifold(VecX::Ones(sq.num_q2()), sq, 0.08, 2.0);
  CHECK(std::abs(evaluate_volume(df, sq) - 1.0) < 1e-12);
  VecX odd(sq.num_q2());
  for (int i = 0; i < sq.num_q2(); ++i) odd[i] = sq.nodes[i][0] - 0.5;
  CHECK(std::abs(evaluate_volume(odd, sq)) < 1e-14);
}

TEST_CASE("weak incompressibility on a curved offset surface") {
  auto p = test::problem(test::config("square_sphere", 12, 0.2, 0.5));
  const Evaluation ev = p->evaluate(test::jittered(*p, 0.6, 0.0, 0.3, 9));
  const FlowDiagnostics d = flow_diagnostics(ev.ctx, p->flow_solver(), ev.flow.U);
  INFO("continuity " << d.max_continuity << " constraint " << d.max_constraint);
  CHECK(d.max_continuity <= 1e-8);
  CHECK(d.max_constraint <= 1e-8);
  CHECK(ev.flow.residual <= 1e-8 * std::max(1.0, ev.flow.U.norm()));
}

TEST_CASE("boundary data on the converged state") {
  auto p = test::problem(test::config("cylinder_strip", 10, 0.1, 0.3));
  const Evaluation ev = p->evaluate(test::jittered(*p, 0.5, 0.0, 0.2, 4));
  const FlowSolver& fs = p->flow_solver();
  const DofMap& d = fs.dofs();
  const VecX D = fs.dirichlet_values(p->config().fluid.U0);
  for (int i = 0; i < d.num_full(); ++i)
    if (d.full_to_free[i] < 0) CHECK(ev.flow.U[i] == D[i]);
  for (int k = 0; k < d.n1; ++k)
    if (d.lambda_fixed[k]) CHECK(ev.flow.U[d.lam(k)] == 0.0);
}

TEST_CASE("warm-started Newton converges quickly") {
  auto p = test::problem(test::config("bending_channel", 16, 1.0));
  VecX x = test::jittered(*p, 0.3, 0.0, 0.2, 1);
  const Evaluation a = p->evaluate(x);
  for (auto& v : x) v = std::clamp(v + 0.01, 0.0, 1.0);
  const Evaluation b = p->evaluate(x, true, &a.flow);
  CHECK(b.flow.newton_iters < 10);
  CHECK(a.flow.newton_iters < 20);
}

TEST_CASE("U0 continuation reaches the full inlet speed") {
  auto cfg = test::config("bending_channel", 12);
  cfg.fluid.U0 = 30.0;
  cfg.solver.max_newton = 6;
  auto p = test::problem(cfg);
  const Evaluation ev = p->evaluate(p->initial_design(0.5, 0.0));
  CHECK(ev.flow.scale_reached == 1.0);
  CHECK(std::isfinite(ev.obj.J));
}
