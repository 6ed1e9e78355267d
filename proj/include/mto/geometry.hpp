#pragma once

#include <cfloat>
#include <vector>

#include "mto/mesh.hpp"
#include "mto/types.hpp"

namespace mto {

inline constexpr double kDefaultEps0 = DBL_EPSILON;

// (|v|^2 + eps0)^(1/2)
double regularized_norm(const Vec3& v, double eps0 = kDefaultEps0);
// directional derivative of regularized_norm at f along df
double norm_variational(const Vec3& f, const Vec3& df, double eps0 = kDefaultEps0);

// Gradients use the convention (grad G)_ij = d_i G_j, so column j of a
// 3x3 gradient is the gradient of component j.
Vec3 transformed_normal(const Vec3& grad_df, const Vec3& n_sigma, double eps0 = kDefaultEps0);
Mat3 transformed_projector(const Vec3& grad_df, const Vec3& n_sigma, double eps0 = kDefaultEps0);
Vec3 transformed_gradient(const Vec3& grad_sigma_g, const Vec3& grad_df, const Vec3& n_sigma,
                          double eps0 = kDefaultEps0);
double transformed_divergence(const Mat3& grad_sigma_G, const Vec3& grad_df, const Vec3& n_sigma,
                              double eps0 = kDefaultEps0);

// First variations in the direction grad_df_tilde of grad d_f.
Mat3 projector_variational(const Vec3& grad_df, const Vec3& grad_df_tilde, const Vec3& n_sigma,
                           double eps0 = kDefaultEps0);
Vec3 gradient_variational(const Vec3& grad_sigma_g, const Vec3& grad_df, const Vec3& grad_df_tilde,
                          const Vec3& n_sigma, double eps0 = kDefaultEps0);
double divergence_variational(const Mat3& grad_sigma_G, const Vec3& grad_df,
                              const Vec3& grad_df_tilde, const Vec3& n_sigma,
                              double eps0 = kDefaultEps0);
Vec3 normal_variational(const Vec3& grad_df, const Vec3& grad_df_tilde, const Vec3& n_sigma,
                        double eps0 = kDefaultEps0);

struct MapJacobian {
  Mat3 jac;
  double det = 1.0;
};

// I + grad d_f n^T + d_f grad n; throws GeometryError when det <= 0 and
// `check` is set.
MapJacobian map_jacobian(double d_f, const Vec3& grad_df, const Vec3& n_sigma, const Mat3& shape,
                         bool check = true);

struct AreaFactor {
  double M = 1.0;
  double dM_d_df = 0.0;
  Vec3 dM_d_grad_df = Vec3::Zero();
};

// Only M, from an already assembled Jacobian and the transformed normal.
double area_measure_factor(const Mat3& jac, double det, const Vec3& n_gamma,
                           double eps0 = kDefaultEps0);
AreaFactor area_measure_factor(double d_f, const Vec3& grad_df, const Vec3& n_sigma,
                               const Mat3& shape, double eps0 = kDefaultEps0);

struct LineFactor {
  double L = 1.0;
  double dL_d_df = 0.0;
  Vec3 dL_d_grad_df = Vec3::Zero();
};

// Length ratio of the offset image of the unit boundary tangent.
LineFactor boundary_measure_factor(double d_f, const Vec3& grad_df, const Vec3& n_sigma,
                                   const Mat3& shape, const Vec3& tangent,
                                   double eps0 = kDefaultEps0);

struct PointGeometry {
  double d = 0.0;
  Vec3 g = Vec3::Zero();
  Vec3 f;       // n_sigma - grad d_f
  double N = 1; // regularized |f|
  Vec3 m;       // n_Gamma
  Mat3 P;       // I - f f^T / N^2
  double det = 1.0;
  AreaFactor area;
};

struct EdgeGeometry {
  double d = 0.0;
  Vec3 g = Vec3::Zero();
  LineFactor line;
};

struct GeometricFactors {
  double eps0 = kDefaultEps0;
  std::vector<PointGeometry> vol;   // per volume quadrature point
  std::vector<EdgeGeometry> edge;   // per boundary quadrature point
};

PointGeometry point_geometry(double d_f, const Vec3& grad_df, const Vec3& n_sigma, const Mat3& shape,
                             double eps0 = kDefaultEps0);

GeometricFactors compute_geometric_factors(const BaseManifoldMesh& mesh, const VecX& d_f,
                                           double eps0 = kDefaultEps0);

enum class Space { Linear, Quadratic };

// Per volume quadrature point surface gradient of a nodal field.
std::vector<Vec3> surface_gradient(const VecX& field, const BaseManifoldMesh& mesh, Space space);

// Nodal field value at every volume quadrature point.
std::vector<double> interpolate(const VecX& field, const BaseManifoldMesh& mesh, Space space);

}  // namespace mto
