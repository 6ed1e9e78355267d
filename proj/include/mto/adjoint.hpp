#pragma once

#include "mto/fields.hpp"
#include "mto/flow.hpp"

namespace mto {

struct AdjointState {
  VecX Ua;        // (u_a, p_a, lambda_a), full layout of the flow unknowns
  VecX gamma_fa;  // Q1
  VecX d_fa;      // Q2
  double ns_residual = 0.0;
};

// Nodal sensitivities: wrt_gamma on every Q1 node, wrt_dm on every Q2 node.
struct SensitivityVector {
  VecX wrt_gamma;
  VecX wrt_dm;
};

// Read-only view of a solved forward chain.
struct ForwardView {
  const BaseManifoldMesh* mesh = nullptr;
  const GeometricFactors* gf = nullptr;
  const DesignState* design = nullptr;
  const FlowContext* ctx = nullptr;
  const FlowSolver* solver = nullptr;
  const PatternFilter* pattern = nullptr;
  const ManifoldFilter* manifold = nullptr;
  const VecX* U = nullptr;
  MaterialParams material;
  FilterParams filter;
  double omega = 0.9;
};

// Adjoint Navier-Stokes operator on the free unknowns, assembled from the
// adjoint weak form (rows: adjoint test functions, columns: adjoint unknowns).
SpMat assemble_adjoint_operator(const FlowContext& ctx, const FlowSolver& solver, const VecX& U);

// Solves A^T-system with right-hand side -dJ/dU restricted to free entries.
VecX solve_adjoint_ns(const FlowContext& ctx, const FlowSolver& solver, const VecX& U, const VecX& dJdU,
                      double* rel_residual = nullptr);

// Pattern-filter adjoint for the objective (Ua given) or for s|Gamma|
// (Ua == nullptr and area == true).
VecX solve_adjoint_pattern_filter(const ForwardView& fw, const VecX* Ua, bool area);

enum class Response { Objective, AreaWeighted, Area };

// Manifold-filter adjoint for one response.
VecX solve_adjoint_manifold_filter(const ForwardView& fw, Response r, const VecX* Ua,
                                   const VecX& gamma_fa);

// Riesz vectors of -int gamma_fa dgamma M and -A_d int d_fa d_m~.
SensitivityVector assemble_sensitivity(const ForwardView& fw, const VecX& gamma_fa, const VecX& d_fa);

SensitivityVector sensitivity_objective(const ForwardView& fw, AdjointState* state = nullptr);
SensitivityVector sensitivity_area(const ForwardView& fw, double* s_out = nullptr);
SensitivityVector sensitivity_volume(const BaseManifoldMesh& mesh, const ManifoldFilter& filter, double A_d,
                                     VecX* d_fa_out = nullptr);

}  // namespace mto
