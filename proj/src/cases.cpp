#include <algorithm>
#include <cmath>
#include <numbers>

#include "mto/mesh.hpp"
#include "mto/quadrature.hpp"

namespace mto {

namespace {

constexpr double kPi = std::numbers::pi;

class Plane : public Parameterization {
 public:
  SurfacePoint eval(double u, double v) const override {
    SurfacePoint p;
    p.x = Vec3(u, v, 0.0);
    p.xu = Vec3::UnitX();
    p.xv = Vec3::UnitY();
    p.normal = Vec3::UnitZ();
    p.shape.setZero();
    return p;
  }
};

// sin z / z
double sinc(double z) { return std::abs(z) < 1e-4 ? 1.0 - z * z / 6.0 + z * z * z * z / 120.0 : std::sin(z) / z; }
// (1 - cos z) / z^2
double cosc(double z) {
  return std::abs(z) < 1e-4 ? 0.5 - z * z / 24.0 + z * z * z * z / 720.0 : (1.0 - std::cos(z)) / (z * z);
}
// (z cos z - sin z) / z^3
double sincd(double z) {
  return std::abs(z) < 1e-3 ? -1.0 / 3.0 + z * z / 30.0 - z * z * z * z / 840.0
                            : (z * std::cos(z) - std::sin(z)) / (z * z * z);
}

// Exponential map of the tangent plane at the north pole of a sphere of
// curvature kappa, applied to sigma * q; kappa = 0 is the plane itself.
class ExpMapSphere : public Parameterization {
 public:
  ExpMapSphere(double kappa, double sigma) : k_(kappa), s_(sigma) {}
  SurfacePoint eval(double u, double v) const override {
    const Eigen::Vector2d p(s_ * u, s_ * v);
    const double r = p.norm(), z = k_ * r;
    const double S = sinc(z), T = sincd(z);
    SurfacePoint sp;
    sp.x = Vec3(p[0] * S, p[1] * S, -k_ * r * r * cosc(z));
    Vec3 d[2];
    for (int i = 0; i < 2; ++i) {
      d[i] = Vec3::Zero();
      d[i][i] = S;
      d[i][0] += k_ * k_ * T * p[0] * p[i];
      d[i][1] += k_ * k_ * T * p[1] * p[i];
      d[i][2] = -k_ * S * p[i];
      d[i] *= s_;
    }
    sp.xu = d[0];
    sp.xv = d[1];
    sp.normal = Vec3(k_ * S * p[0], k_ * S * p[1], std::cos(z));
    sp.normal.normalize();
    sp.shape = k_ * (Mat3::Identity() - sp.normal * sp.normal.transpose());
    return sp;
  }

 private:
  double k_, s_;
};

// Strip [0,W] x [0,H] rolled around the y axis through angle Theta = kappa W.
class RolledStrip : public Parameterization {
 public:
  RolledStrip(double kappa, double width) : k_(kappa), w_(width) {}
  SurfacePoint eval(double u, double v) const override {
    const double s = u - 0.5 * w_, th = k_ * s;
    SurfacePoint sp;
    sp.x = Vec3(s * sinc(th), v, -k_ * s * s * cosc(th));
    const Vec3 et(std::cos(th), 0.0, -std::sin(th));
    sp.xu = et;
    sp.xv = Vec3::UnitY();
    sp.normal = Vec3(std::sin(th), 0.0, std::cos(th));
    sp.shape = k_ * et * et.transpose();
    return sp;
  }

 private:
  double k_, w_;
};

// (theta, phi) latitude-longitude sphere.
class LatLongSphere : public Parameterization {
 public:
  explicit LatLongSphere(double r) : r_(r) {}
  SurfacePoint eval(double th, double ph) const override {
    SurfacePoint sp;
    const Vec3 n(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    sp.x = r_ * n;
    sp.xu = r_ * Vec3(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th));
    sp.xv = r_ * Vec3(-std::sin(th) * std::sin(ph), std::sin(th) * std::cos(ph), 0.0);
    sp.normal = n;
    sp.shape = (Mat3::Identity() - n * n.transpose()) / r_;
    return sp;
  }

 private:
  double r_;
};

// integral of sinc(c |q|) over [-1/2,1/2]^2
double exp_map_area(double c) {
  const GaussRule g = gauss_legendre(16);
  const int sub = 4;
  double a = 0.0;
  for (int bi = 0; bi < sub; ++bi)
    for (int bj = 0; bj < sub; ++bj)
      for (size_t i = 0; i < g.x.size(); ++i)
        for (size_t j = 0; j < g.x.size(); ++j) {
          const double x = -0.5 + (bi + 0.5 * (g.x[i] + 1.0)) / sub;
          const double y = -0.5 + (bj + 0.5 * (g.x[j] + 1.0)) / sub;
          a += g.w[i] * g.w[j] * sinc(c * std::hypot(x, y)) / (4.0 * sub * sub);
        }
  return a;
}

void check_common(const CaseSpec& spec) {
  if (spec.resolution < 8)
    throw ConfigError("case.resolution must be >= 8 (got " + std::to_string(spec.resolution) + ")");
  if (!(spec.t >= 0.0 && spec.t <= 1.0))
    throw ConfigError("case.t must lie in [0,1] (got " + std::to_string(spec.t) + ")");
}

int stub_cells(double length, int n) { return std::max(1, static_cast<int>(std::lround(length * n))); }

BaseManifoldMesh bending_channel(const CaseSpec& c) {
  const int n = c.resolution;
  const double h = 1.0 / n;
  const double w_in = c.param("inlet_width", 0.25), y_in = c.param("inlet_center", 0.75);
  const double w_out = c.param("outlet_width", 0.25), x_out = c.param("outlet_center", 0.75);
  const int ns = stub_cells(c.param("stub_length", 0.125), n);
  const double lo = -ns * h;
  PatchSpec p;
  p.case_id = c.case_id;
  p.param = make_plane();
  p.u0 = lo; p.u1 = 1.0; p.v0 = lo; p.v1 = 1.0;
  p.nu = p.nv = n + ns;
  p.flat = true;
  auto in_stub = [=](double u, double v) {
    return (u < 0.0 && v > 0.0 && std::abs(v - y_in) < 0.5 * w_in) ||
           (v < 0.0 && u > 0.0 && std::abs(u - x_out) < 0.5 * w_out);
  };
  p.active = [=](double u, double v) { return (u > 0.0 && v > 0.0) || in_stub(u, v); };
  p.fluid = in_stub;
  const double tol = 1e-9;
  p.tag = [=](double u, double v, int side) -> std::pair<std::string, BoundaryTag> {
    if (side == 3 && std::abs(u - lo) < tol) return {"inlet", BoundaryTag::Inlet};
    if (side == 0 && std::abs(v - lo) < tol) return {"outlet", BoundaryTag::Open};
    return {"wall", BoundaryTag::Wall};
  };
  return build_patch_mesh(p);
}

BaseManifoldMesh four_terminal(const CaseSpec& c) {
  const int n = c.resolution;
  const double h = 1.0 / n;
  const double w = c.param("terminal_width", 0.25);
  const double y1 = c.param("terminal_center_1", 0.25), y2 = c.param("terminal_center_2", 0.75);
  const int ns = stub_cells(c.param("stub_length", 0.125), n);
  const double lo = -ns * h, hi = 1.0 + ns * h;
  PatchSpec p;
  p.case_id = c.case_id;
  p.param = make_plane();
  p.u0 = lo; p.u1 = hi; p.v0 = 0.0; p.v1 = 1.0;
  p.nu = n + 2 * ns;
  p.nv = n;
  p.flat = true;
  auto in_band = [=](double v) { return std::abs(v - y1) < 0.5 * w || std::abs(v - y2) < 0.5 * w; };
  auto in_stub = [=](double u, double v) { return (u < 0.0 || u > 1.0) && in_band(v); };
  p.active = [=](double u, double v) { return (u > 0.0 && u < 1.0) || in_stub(u, v); };
  p.fluid = in_stub;
  const double tol = 1e-9;
  p.tag = [=](double u, double v, int side) -> std::pair<std::string, BoundaryTag> {
    const std::string k = std::abs(v - y1) < 0.5 * w ? "1" : "2";
    if (side == 3 && std::abs(u - lo) < tol) return {"inlet_" + k, BoundaryTag::Inlet};
    if (side == 1 && std::abs(u - hi) < tol) return {"outlet_" + k, BoundaryTag::Open};
    return {"wall", BoundaryTag::Wall};
  };
  return build_patch_mesh(p);
}

// Straight channel, all fluid. With pocket_height > 0 a design pocket
// (Sigma_D) is attached to the upper wall over [pocket_start, pocket_end].
BaseManifoldMesh channel(const CaseSpec& c) {
  const double L = c.param("length", 4.0), H = c.param("height", 1.0);
  if (!(L > 0 && H > 0)) throw ConfigError("channel length and height must be positive");
  const double h = H / c.resolution;
  const int np = static_cast<int>(std::lround(c.param("pocket_height", 0.0) / h));
  const double x0 = c.param("pocket_start", 0.375 * L), x1 = c.param("pocket_end", 0.625 * L);
  if (np > 0 && !(0.0 <= x0 && x0 < x1 && x1 <= L)) throw ConfigError("channel pocket must lie inside [0, length]");
  PatchSpec p;
  p.case_id = c.case_id;
  p.param = make_plane();
  p.u0 = 0.0; p.u1 = L; p.v0 = 0.0; p.v1 = H + np * h;
  p.nv = c.resolution + np;
  p.nu = std::max(1, static_cast<int>(std::lround(c.resolution * L / H)));
  p.flat = true;
  p.characteristic_length = H;
  p.active = [=](double u, double v) { return v < H || (u > x0 && u < x1); };
  p.fluid = [=](double, double v) { return v < H; };
  const double tol = 1e-9 * L;
  p.tag = [=](double u, double v, int side) -> std::pair<std::string, BoundaryTag> {
    if (side == 3 && std::abs(u) < tol && v < H) return {"inlet", BoundaryTag::Inlet};
    if (side == 1 && std::abs(u - L) < tol && v < H) return {"outlet", BoundaryTag::Open};
    return {"wall", BoundaryTag::Wall};
  };
  return build_patch_mesh(p);
}

BaseManifoldMesh square_sphere(const CaseSpec& c) {
  const int n = c.resolution;
  const double third = c.param("outlet_fraction", 1.0 / 3.0);
  PatchSpec p;
  p.case_id = c.case_id;
  p.param = make_square_sphere(c.t);
  p.u0 = -0.5; p.u1 = 0.5; p.v0 = -0.5; p.v1 = 0.5;
  p.nu = p.nv = n;
  p.flat = c.t == 0.0;
  const double tol = 1e-9;
  p.tag = [=](double u, double v, int side) -> std::pair<std::string, BoundaryTag> {
    if (side == 3 && std::abs(u + 0.5) < tol) return {"inlet", BoundaryTag::Inlet};
    if (side == 1 && std::abs(u - 0.5) < tol && std::abs(v) < 0.5 * third) return {"outlet", BoundaryTag::Open};
    return {"wall", BoundaryTag::Wall};
  };
  return build_patch_mesh(p);
}

BaseManifoldMesh cylinder_strip(const CaseSpec& c) {
  const int n = c.resolution;
  const double W = c.param("width", 1.0), H = c.param("height", 1.0);
  const double frac = c.param("port_fraction", 1.0 / 3.0);
  if (!(W > 0 && H > 0)) throw ConfigError("cylinder_strip width and height must be positive");
  PatchSpec p;
  p.case_id = c.case_id;
  p.param = make_cylinder_strip(c.t, W);
  p.u0 = 0.0; p.u1 = W; p.v0 = 0.0; p.v1 = H;
  p.nu = n;
  p.nv = std::max(1, static_cast<int>(std::lround(n * H / W)));
  p.periodic_u = c.t == 0.0;
  p.flat = c.t == 1.0;
  p.characteristic_length = std::sqrt(W * H);
  const double tol = 1e-9;
  p.tag = [=](double u, double v, int side) -> std::pair<std::string, BoundaryTag> {
    const bool port = std::abs(u - 0.5 * W) < 0.5 * frac * W;
    if (side == 0 && std::abs(v) < tol && port) return {"inlet", BoundaryTag::Inlet};
    if (side == 2 && std::abs(v - H) < tol && port) return {"outlet", BoundaryTag::Open};
    return {"wall", BoundaryTag::Wall};
  };
  return build_patch_mesh(p);
}

BaseManifoldMesh sphere(const CaseSpec& c) {
  const double R = c.param("radius", 1.0);
  PatchSpec p;
  p.case_id = c.case_id;
  p.param = make_sphere(R);
  p.u0 = 0.0; p.u1 = kPi; p.v0 = 0.0; p.v1 = 2.0 * kPi;
  p.nu = c.resolution;
  p.nv = 2 * c.resolution;
  p.characteristic_length = R;
  return build_patch_mesh(p);
}

}  // namespace

std::shared_ptr<const Parameterization> make_plane() { return std::make_shared<Plane>(); }

std::shared_ptr<const Parameterization> make_square_sphere(double t, double* kappa, double* sigma) {
  // corners reach geodesic angle t*pi; sigma rescales to unit area
  const double c = t * kPi * std::sqrt(2.0);
  const double s = 1.0 / std::sqrt(exp_map_area(c));
  const double k = c / s;
  if (kappa) *kappa = k;
  if (sigma) *sigma = s;
  return std::make_shared<ExpMapSphere>(k, s);
}

std::shared_ptr<const Parameterization> make_cylinder_strip(double t, double width) {
  return std::make_shared<RolledStrip>(2.0 * kPi * (1.0 - t) / width, width);
}

std::shared_ptr<const Parameterization> make_sphere(double radius) {
  return std::make_shared<LatLongSphere>(radius);
}

BaseManifoldMesh build_case(const CaseSpec& spec) {
  check_common(spec);
  const std::string& id = spec.case_id;
  if (id == "bending_channel") return bending_channel(spec);
  if (id == "four_terminal") return four_terminal(spec);
  if (id == "square_sphere") return square_sphere(spec);
  if (id == "cylinder_strip") return cylinder_strip(spec);
  if (id == "channel") return channel(spec);
  if (id == "sphere") return sphere(spec);
  throw ConfigError("unknown case_id '" + id + "'");
}

double family_area(const CaseSpec& spec, int gauss_points) {
  check_common(spec);
  std::shared_ptr<const Parameterization> par;
  double u0 = 0, u1 = 1, v0 = 0, v1 = 1;
  if (spec.case_id == "square_sphere") {
    par = make_square_sphere(spec.t);
    u0 = v0 = -0.5;
    u1 = v1 = 0.5;
  } else if (spec.case_id == "cylinder_strip") {
    u1 = spec.param("width", 1.0);
    v1 = spec.param("height", 1.0);
    par = make_cylinder_strip(spec.t, u1);
  } else {
    throw ConfigError("family_area: '" + spec.case_id + "' is not a deformation family");
  }
  const GaussRule g = gauss_legendre(gauss_points);
  const int sub = 4;
  const double du = (u1 - u0) / sub, dv = (v1 - v0) / sub;
  double a = 0.0;
  for (int bi = 0; bi < sub; ++bi)
    for (int bj = 0; bj < sub; ++bj)
      for (int i = 0; i < gauss_points; ++i)
        for (int j = 0; j < gauss_points; ++j) {
          const double u = u0 + (bi + 0.5 * (g.x[i] + 1.0)) * du;
          const double v = v0 + (bj + 0.5 * (g.x[j] + 1.0)) * dv;
          const SurfacePoint sp = par->eval(u, v);
          a += 0.25 * g.w[i] * g.w[j] * du * dv * sp.xu.cross(sp.xv).norm();
        }
  return a;
}

InletProfile inlet_profile(const BaseManifoldMesh& mesh, double U0) {
  InletProfile prof;
  prof.value.assign(mesh.num_q2(), Vec3::Zero());
  prof.on_inlet.assign(mesh.num_q2(), 0);
  prof.zeta.assign(mesh.num_q2(), -1.0);
  const GaussRule g = gauss_legendre(3);
  for (const BoundarySegment& seg : mesh.segments) {
    if (seg.tag != BoundaryTag::Inlet || seg.edges.empty()) continue;
    if (!(seg.length > 0.0)) throw ConfigError("inlet segment '" + seg.name + "' has zero length");
    // order the edges into a chain through shared end vertices
    std::map<int, std::vector<int>> at;
    for (int b : seg.edges)
      for (int k : mesh.edges[b].q1) at[k].push_back(b);
    int start = seg.edges.front(), start_node = mesh.edges[start].q1[0];
    for (auto& [node, list] : at)
      if (list.size() == 1) {
        start = list.front();
        start_node = node;
        break;
      }
    std::vector<char> used(mesh.edges.size(), 0);
    int b = start, from = start_node;
    double s = 0.0;
    while (b >= 0 && !used[b]) {
      used[b] = 1;
      const BoundaryEdge& be = mesh.edges[b];
      const Element& el = mesh.elements[be.element];
      const bool fwd = be.q1[0] == from;
      // lengths of the two halves of the edge
      double half[2] = {0.0, 0.0};
      for (int h = 0; h < 2; ++h)
        for (int k = 0; k < 3; ++k) {
          const double t = (h == 0 ? -0.5 : 0.5) + 0.5 * g.x[k];
          const auto r = side_point(be.side, t);
          const double hu = 0.5 * (el.u1 - el.u0), hv = 0.5 * (el.v1 - el.v0);
          const SurfacePoint sp = mesh.param->eval(el.u0 + (r[0] + 1) * hu, el.v0 + (r[1] + 1) * hv);
          const Vec3 tv = (be.side % 2 == 0) ? Vec3(sp.xu * hu) : Vec3(sp.xv * hv);
          half[h] += 0.5 * g.w[k] * tv.norm();
        }
      const double len = half[0] + half[1];
      for (int k = 0; k < 3; ++k) {
        const int node = be.q2[k];
        double sk;
        if (fwd) sk = k == 0 ? s : (k == 1 ? s + half[0] : s + len);
        else sk = k == 2 ? s : (k == 1 ? s + half[1] : s + len);
        const double zeta = std::clamp(sk / seg.length, 0.0, 1.0);
        // inward direction: minus the outward conormal at the node
        const auto r = side_point(be.side, k - 1.0);
        const double hu = 0.5 * (el.u1 - el.u0), hv = 0.5 * (el.v1 - el.v0);
        const SurfacePoint sp = mesh.param->eval(el.u0 + (r[0] + 1) * hu, el.v0 + (r[1] + 1) * hv);
        const Vec3 a1 = sp.xu, a2 = sp.xv;
        const Vec3 tt = ((be.side % 2 == 0) ? a1 : a2).normalized();
        Vec3 out = (be.side == 0) ? -a2 : (be.side == 1) ? a1 : (be.side == 2) ? a2 : -a1;
        out -= out.dot(tt) * tt;
        out -= out.dot(sp.normal) * sp.normal;
        out.normalize();
        prof.value[node] = -U0 * 4.0 * zeta * (1.0 - zeta) * out;
        prof.on_inlet[node] = 1;
        prof.zeta[node] = zeta;
      }
      s += len;
      from = fwd ? be.q1[1] : be.q1[0];
      int next = -1;
      for (int cand : at[from])
        if (!used[cand]) next = cand;
      b = next;
    }
  }
  return prof;
}

}  // namespace mto
