#pragma once

#include <array>
#include <vector>

#include "mto/fields.hpp"
#include "mto/geometry.hpp"
#include "mto/linalg.hpp"
#include "mto/mesh.hpp"

namespace mto {

struct FluidParams {
  double rho = 1.0;
  double eta = 1.0;
  double U0 = 1.0;
};

struct SolverOptions {
  int max_newton = 40;
  double rtol = 1e-8;
  double atol = 1e-12;
  bool polish = true;        // one extra Newton step after convergence
  int max_halvings = 8;      // U0 continuation depth
  double lambda_sign = 1.0;  // multiplier direction (n - s grad d_f)/|.|
  bool verbose = false;
};

// Unknown layout: u (3 per Q2 node), then p (Q1), then lambda (Q1).
class DofMap {
 public:
  explicit DofMap(const BaseManifoldMesh& mesh);
  int n2 = 0, n1 = 0;
  int num_full() const { return 3 * n2 + 2 * n1; }
  int num_free() const { return static_cast<int>(free_to_full.size()); }
  int u(int node, int c) const { return 3 * node + c; }
  int p(int k) const { return 3 * n2 + k; }
  int lam(int k) const { return 3 * n2 + n1 + k; }
  std::vector<int> full_to_free;  // -1 on constrained entries
  std::vector<int> free_to_full;
  std::vector<char> velocity_fixed;  // per Q2 node: inlet or wall
  std::vector<char> lambda_fixed;    // per Q1 node
  std::vector<char> pressure_pinned; // per Q1 node
  VecX restrict(const VecX& full) const;
};

struct FlowState {
  VecX U;  // full unknown vector
  int newton_iters = 0;
  double residual = 0.0;
  double scale_reached = 1.0;
};

// Everything the element kernels read besides the unknowns.
struct FlowContext {
  const BaseManifoldMesh* mesh = nullptr;
  const GeometricFactors* gf = nullptr;
  std::vector<double> alpha;   // per volume quadrature point
  FluidParams fluid;
  double lambda_sign = 1.0;
};

FlowContext make_flow_context(const BaseManifoldMesh& mesh, const GeometricFactors& gf,
                              const std::vector<double>& gamma_p, const FluidParams& fluid,
                              const MaterialParams& mat, double lambda_sign = 1.0);

// Multiplier direction at a quadrature point.
Vec3 multiplier_direction(const PointGeometry& g, const Vec3& n_sigma, double sign);

// Fixed sparsity of the free-free block with per-element scatter maps.
class FreePattern {
 public:
  FreePattern(const BaseManifoldMesh& mesh, const DofMap& dofs);
  SpMat matrix;  // values zeroed on construction
  std::vector<std::array<int, 35 * 35>> slot;  // (row*35+col) -> value index or -1
  std::vector<std::array<int, 35>> local_full; // local dof -> full index
};

class FlowSolver {
 public:
  explicit FlowSolver(const BaseManifoldMesh& mesh);
  const BaseManifoldMesh& mesh() const { return *mesh_; }
  const DofMap& dofs() const { return dofs_; }
  const InletProfile& inlet_unit() const { return inlet_; }  // profile for U0 = 1
  const FreePattern& pattern() const { return pattern_; }

  // Full-length values of every constrained entry for inlet speed U0.
  VecX dirichlet_values(double U0) const;

  // Residual (full length, constrained rows included) and free-free Jacobian.
  VecX residual(const FlowContext& ctx, const VecX& U) const;
  void assemble(const FlowContext& ctx, const VecX& U, VecX* R, SpMat* K_free) const;

  FlowState solve(const FlowContext& ctx, const SolverOptions& opt, const FlowState* warm = nullptr) const;

 private:
  bool newton(const FlowContext& ctx, const SolverOptions& opt, double scale, VecX& U, int& iters,
              double& res) const;
  const BaseManifoldMesh* mesh_;
  DofMap dofs_;
  InletProfile inlet_;
  FreePattern pattern_;
};

// Per element: gather local unknowns (27 velocity, 4 pressure, 4 multiplier).
void gather_local(const Element& el, const DofMap& dofs, const VecX& U, double* loc);

struct ObjectiveParts {
  double J = 0.0;
  double dissipation = 0.0;   // viscous part of the volume integral (before omega)
  double darcy = 0.0;         // alpha |u|^2 part (before omega)
  double pressure_drop = 0.0; // inlet minus outlet pressure integrals (before 1 - omega)
};

ObjectiveParts evaluate_objective(const FlowContext& ctx, const DofMap& dofs, const VecX& U,
                                  double omega);

// dJ/dU (full length).
VecX objective_gradient(const FlowContext& ctx, const DofMap& dofs, const VecX& U, double omega);

struct AreaResult {
  double s = 0.0;
  double area_gamma = 0.0;  // |Gamma|
};

AreaResult evaluate_area(const BaseManifoldMesh& mesh, const GeometricFactors& gf,
                         const std::vector<double>& gamma_p);
double evaluate_volume(const VecX& d_f, const BaseManifoldMesh& mesh);

struct FlowDiagnostics {
  double max_tangential = 0.0;     // max |u . n_Gamma| at quadrature points
  double max_speed = 0.0;
  double max_speed_solid = 0.0;    // over design elements
  double max_continuity = 0.0;     // max |pressure-row residual|
  double max_constraint = 0.0;     // max |multiplier-row residual|
};

FlowDiagnostics flow_diagnostics(const FlowContext& ctx, const FlowSolver& solver, const VecX& U);

}  // namespace mto
