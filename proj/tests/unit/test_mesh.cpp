#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "mto/mesh.hpp"
#include "mto/quadrature.hpp"

using namespace mto;

namespace {

BaseManifoldMesh make(const std::string& id, int res, double t = 0.0) {
  CaseSpec cs;
  cs.case_id = id;
  cs.resolution = res;
  cs.t = t;
  return build_case(cs);
}

// Each element side as a sorted Q1 vertex pair.
std::map<std::pair<int, int>, int> side_counts(const BaseManifoldMesh& m) {
  std::map<std::pair<int, int>, int> c;
  for (const Element& el : m.elements)
    for (int s = 0; s < 4; ++s) {
      const auto& side = kSideQ2[s];
      int a = m.q2_to_q1[el.q2[side[0]]], b = m.q2_to_q1[el.q2[side[2]]];
      if (a > b) std::swap(a, b);
      ++c[{a, b}];
    }
  return c;
}

}  // namespace

TEST_CASE("gauss legendre rules integrate polynomials") {
  for (int n = 1; n <= 6; ++n) {
    const GaussRule g = gauss_legendre(n);
    for (int p = 0; p < 2 * n; ++p) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += g.w[i] * std::pow(g.x[i], p);
      const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
      CHECK(s == doctest::Approx(exact).epsilon(1e-14));
    }
  }
}

TEST_CASE("shape functions form a partition of unity") {
  for (double xi : {-0.7, 0.1, 0.9})
    for (double eta : {-0.3, 0.5}) {
      const ShapeQ2 s2 = shape_q2(xi, eta);
      const ShapeQ1 s1 = shape_q1(xi, eta);
      double a = 0, b = 0, c = 0, d = 0;
      for (int i = 0; i < 9; ++i) {
        a += s2.N[i];
        b += s2.dxi[i];
      }
      for (int i = 0; i < 4; ++i) {
        c += s1.N[i];
        d += s1.deta[i];
      }
      CHECK(a == doctest::Approx(1.0));
      CHECK(std::abs(b) < 1e-14);
      CHECK(c == doctest::Approx(1.0));
      CHECK(std::abs(d) < 1e-14);
    }
}

TEST_CASE("case validation") {
  CaseSpec cs;
  cs.case_id = "nope";
  CHECK_THROWS_AS(build_case(cs), ConfigError);
  cs.case_id = "bending_channel";
  cs.resolution = 4;
  CHECK_THROWS_AS(build_case(cs), ConfigError);
  cs.resolution = 8;
  cs.t = 1.5;
  CHECK_THROWS_AS(build_case(cs), ConfigError);
}

TEST_CASE("mesh invariants on every case") {
  const std::vector<std::pair<std::string, double>> cases = {
      {"bending_channel", 0.0}, {"four_terminal", 0.0}, {"square_sphere", 0.0}, {"square_sphere", 0.6},
      {"square_sphere", 1.0},   {"cylinder_strip", 0.0}, {"cylinder_strip", 0.5}, {"cylinder_strip", 1.0},
      {"channel", 0.0}};
  for (const auto& [id, t] : cases) {
    CAPTURE(id);
    CAPTURE(t);
    const BaseManifoldMesh m = make(id, 8, t);
    // normals
    double nerr = 0, shape_max = 0;
    for (const QuadPoint& q : m.qp) {
      nerr = std::max(nerr, std::abs(q.n.norm() - 1.0));
      shape_max = std::max(shape_max, q.shape.cwiseAbs().maxCoeff());
    }
    CHECK(nerr <= 1e-12);
    if (m.flat) CHECK(shape_max == 0.0);
    // 2-manifold: interior sides shared by 2 elements, boundary sides by 1
    const auto counts = side_counts(m);
    std::set<std::pair<int, int>> boundary;
    for (const BoundaryEdge& be : m.edges) {
      int a = be.q1[0], b = be.q1[1];
      if (a > b) std::swap(a, b);
      boundary.insert({a, b});
    }
    CHECK(boundary.size() == m.edges.size());
    for (const auto& [side, k] : counts) {
      if (boundary.count(side)) CHECK(k == 1);
      else CHECK(k == 2);
    }
    // every boundary edge in exactly one segment
    std::vector<int> owner(m.edges.size(), 0);
    for (const BoundarySegment& s : m.segments)
      for (int e : s.edges) ++owner[e];
    for (int o : owner) CHECK(o == 1);
    // Q1 nodes are a subset of Q2 nodes
    const ElementSpaces sp = m.spaces();
    CHECK(sp.num_linear == m.num_q1());
    CHECK(sp.num_quadratic == m.num_q2());
    for (int k = 0; k < m.num_q1(); ++k) CHECK(m.q2_to_q1[m.q1_nodes[k]] == k);
    CHECK(m.has_tag(BoundaryTag::Inlet));
  }
}

TEST_CASE("flat boundary partition and areas") {
  const BaseManifoldMesh b = make("bending_channel", 16);
  double total = 0, seg = 0;
  for (size_t e = 0; e < b.edges.size(); ++e)
    for (int q = 0; q < kEQP; ++q) total += b.edge_point(static_cast<int>(e), q).w;
  for (const BoundarySegment& s : b.segments) seg += s.length;
  CHECK(seg == doctest::Approx(total).epsilon(1e-13));
  // square plus two stubs 1/8 x 1/4
  CHECK(b.area() == doctest::Approx(1.0 + 2 * 0.125 * 0.25).epsilon(1e-13));
  CHECK(b.find_segment("inlet")->length == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(b.find_segment("outlet")->length == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(b.pins.empty());
  int fluid = 0;
  for (const Element& el : b.elements) fluid += el.fluid;
  CHECK(fluid == 2 * 2 * 4);
  const BaseManifoldMesh f = make("four_terminal", 16);
  for (const char* name : {"inlet_1", "inlet_2", "outlet_1", "outlet_2"}) {
    REQUIRE(f.find_segment(name) != nullptr);
    CHECK(f.find_segment(name)->length == doctest::Approx(0.25).epsilon(1e-13));
  }
}

TEST_CASE("deformation families conserve area") {
  for (const char* id : {"square_sphere", "cylinder_strip"}) {
    CaseSpec cs;
    cs.case_id = id;
    cs.resolution = 8;
    cs.t = 0.0;
    const double a0 = family_area(cs);
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      cs.t = t;
      CAPTURE(id);
      CAPTURE(t);
      CHECK(std::abs(family_area(cs) - a0) / a0 <= 1e-6);
      CHECK(std::abs(build_case(cs).area() - a0) / a0 <= 1e-4);
    }
  }
  CHECK(make("square_sphere", 8, 0.0).flat);
  CHECK(!make("square_sphere", 8, 0.5).flat);
  CHECK(make("cylinder_strip", 8, 1.0).flat);
}

TEST_CASE("square_sphere at t = 1 wraps the corners onto the antipode") {
  double kappa = 0, sigma = 0;
  const auto p = make_square_sphere(1.0, &kappa, &sigma);
  // the four corners all map to the antipode of the centre
  const Vec3 c = p->eval(0, 0).x;
  for (double su : {-0.5, 0.5})
    for (double sv : {-0.5, 0.5}) {
      const Vec3 x = p->eval(su, sv).x;
      CHECK((x - c).norm() == doctest::Approx(2.0 / kappa).epsilon(1e-10));
    }
  CHECK(sigma > 0);
}

TEST_CASE("mesh area converges at second order or better") {
  CaseSpec cs;
  cs.case_id = "sphere";
  double prev = 0;
  for (int r : {8, 16}) {
    cs.resolution = r;
    const double err = std::abs(build_case(cs).area() - 4 * M_PI);
    if (prev > 0) CHECK(prev / err >= 3.9);
    prev = err;
  }
}

TEST_CASE("inlet profile") {
  const BaseManifoldMesh m = make("bending_channel", 16);
  const double U0 = 1.7;
  const InletProfile ip = inlet_profile(m, U0);
  double peak = 0;
  const Vec3 inward(1, 0, 0);
  for (int i = 0; i < m.num_q2(); ++i) {
    if (!ip.on_inlet[i]) continue;
    const double z = ip.zeta[i];
    const double mag = ip.value[i].norm();
    CHECK(mag == doctest::Approx(4 * U0 * z * (1 - z)).epsilon(1e-13));
    if (z == 0.0 || z == 1.0) CHECK(mag == 0.0);
    if (mag > 0) CHECK((ip.value[i] / mag - inward).norm() <= 1e-13);
    peak = std::max(peak, mag);
  }
  CHECK(peak == doctest::Approx(U0).epsilon(1e-13));
  // quadrature of the interpolated profile
  const BoundarySegment* s = m.find_segment("inlet");
  double flux = 0;
  for (int e : s->edges)
    for (int q = 0; q < kEQP; ++q) {
      const EdgeQuadPoint& p = m.edge_point(e, q);
      const Element& el = m.elements[m.edges[e].element];
      Vec3 u = Vec3::Zero();
      for (int a = 0; a < 9; ++a) u += p.phi2[a] * ip.value[el.q2[a]];
      flux += p.w * u.norm();
    }
  CHECK(flux == doctest::Approx(2.0 / 3.0 * U0 * s->length).epsilon(1e-12));
}
