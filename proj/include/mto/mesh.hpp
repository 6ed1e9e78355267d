#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mto/types.hpp"

namespace mto {

// Point of a parameterized surface with first derivatives, analytic unit
// normal and shape operator grad_Sigma n_Sigma (symmetric, tangential).
struct SurfacePoint {
  Vec3 x, xu, xv, normal;
  Mat3 shape;
};

class Parameterization {
 public:
  virtual ~Parameterization() = default;
  virtual SurfacePoint eval(double u, double v) const = 0;
};

enum class BoundaryTag { Inlet, Open, Wall };

std::string to_string(BoundaryTag tag);

struct BoundarySegment {
  std::string name;
  BoundaryTag tag = BoundaryTag::Wall;
  std::vector<int> edges;
  double length = 0.0;
};

struct PinPoint {
  int q1_node = 0;
  double value = 0.0;
};

struct Element {
  std::array<int, 9> q2{};
  std::array<int, 4> q1{};
  double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
  bool fluid = false;  // channel domain: gamma_p forced to 1
};

struct BoundaryEdge {
  int element = 0;
  int side = 0;
  int segment = 0;
  std::array<int, 3> q2{};
  std::array<int, 2> q1{};
};

struct QuadPoint {
  double w = 0.0;  // Gauss weight times dSigma (or dl on edges)
  Vec3 x, n;
  Mat3 shape;
  std::array<double, 9> phi2{};
  std::array<Vec3, 9> grad2;
  std::array<double, 4> phi1{};
  std::array<Vec3, 4> grad1;
};

struct EdgeQuadPoint : QuadPoint {
  Vec3 tangent;   // unit tangent of the boundary curve
  Vec3 conormal;  // unit outward conormal, tangent to Sigma
};

struct ElementSpaces {
  int num_linear = 0;
  int num_quadratic = 0;
  std::vector<int> linear_nodes;  // Q2 index of every Q1 node
};

inline constexpr int kQP = 9;   // volume points per element
inline constexpr int kEQP = 3;  // points per boundary edge

class BaseManifoldMesh {
 public:
  std::string case_id;
  bool flat = false;
  double characteristic_length = 1.0;
  std::shared_ptr<const Parameterization> param;

  std::vector<Vec3> nodes;  // Q2 node coordinates
  std::vector<std::array<double, 2>> node_uv;
  std::vector<int> q1_nodes;  // Q2 index per Q1 node
  std::vector<int> q2_to_q1;  // -1 for non-vertex nodes
  std::vector<Element> elements;
  std::vector<BoundaryEdge> edges;
  std::vector<BoundarySegment> segments;
  std::vector<PinPoint> pins;
  std::vector<QuadPoint> qp;        // kQP per element, element-major
  std::vector<EdgeQuadPoint> eqp;   // kEQP per boundary edge

  int num_q2() const { return static_cast<int>(nodes.size()); }
  int num_q1() const { return static_cast<int>(q1_nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }
  const QuadPoint& point(int e, int q) const { return qp[e * kQP + q]; }
  const EdgeQuadPoint& edge_point(int b, int q) const { return eqp[b * kEQP + q]; }

  double area() const;
  ElementSpaces spaces() const;
  const BoundarySegment* find_segment(const std::string& name) const;
  bool has_tag(BoundaryTag tag) const;
};

struct CaseSpec {
  std::string case_id = "bending_channel";
  int resolution = 24;
  double U0 = 1.0;
  double t = 0.0;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
};

// Structured patch over a parameter rectangle with an active-cell mask.
struct PatchSpec {
  std::string case_id;
  std::shared_ptr<const Parameterization> param;
  double u0 = 0, u1 = 1, v0 = 0, v1 = 1;
  int nu = 8, nv = 8;
  bool periodic_u = false;
  bool flat = false;
  double characteristic_length = 1.0;
  std::function<bool(double, double)> active;  // cell centre -> keep
  std::function<bool(double, double)> fluid;   // cell centre -> channel cell
  // edge midpoint (u, v) and element side -> segment name and tag
  std::function<std::pair<std::string, BoundaryTag>(double, double, int)> tag;
};

BaseManifoldMesh build_patch_mesh(const PatchSpec& spec);

// Benchmark cases: bending_channel, four_terminal, square_sphere,
// cylinder_strip; verification cases: channel, sphere.
BaseManifoldMesh build_case(const CaseSpec& spec);

// Area enclosed by the parameterization of a deformation family at t,
// integrated directly from the parameterization.
double family_area(const CaseSpec& spec, int gauss_points = 24);

struct InletProfile {
  std::vector<Vec3> value;   // per Q2 node
  std::vector<char> on_inlet;
  std::vector<double> zeta;  // normalized arclength, -1 off the inlet
};

InletProfile inlet_profile(const BaseManifoldMesh& mesh, double U0);

// Shared parameterizations (also used by tests).
std::shared_ptr<const Parameterization> make_plane();
std::shared_ptr<const Parameterization> make_square_sphere(double t, double* kappa = nullptr,
                                                           double* sigma = nullptr);
std::shared_ptr<const Parameterization> make_cylinder_strip(double t, double width);
std::shared_ptr<const Parameterization> make_sphere(double radius);

}  // namespace mto
