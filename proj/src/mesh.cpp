#include "mto/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "mto/quadrature.hpp"

namespace mto {

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Inlet: return "inlet";
    case BoundaryTag::Open: return "open";
    default: return "wall";
  }
}

double CaseSpec::param(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

double BaseManifoldMesh::area() const {
  double a = 0.0;
  for (const auto& q : qp) a += q.w;
  return a;
}

ElementSpaces BaseManifoldMesh::spaces() const {
  ElementSpaces s;
  s.num_linear = num_q1();
  s.num_quadratic = num_q2();
  s.linear_nodes = q1_nodes;
  return s;
}

const BoundarySegment* BaseManifoldMesh::find_segment(const std::string& name) const {
  for (const auto& s : segments)
    if (s.name == name) return &s;
  return nullptr;
}

bool BaseManifoldMesh::has_tag(BoundaryTag tag) const {
  return std::any_of(segments.begin(), segments.end(),
                     [&](const BoundarySegment& s) { return s.tag == tag && !s.edges.empty(); });
}

namespace {

// Fill basis values and surface gradients at reference point (xi, eta).
void fill_point(const Parameterization& par, const Element& el, double xi, double eta,
                QuadPoint& q, Vec3* a1_out, Vec3* a2_out) {
  const double hu = 0.5 * (el.u1 - el.u0), hv = 0.5 * (el.v1 - el.v0);
  const double u = el.u0 + (xi + 1.0) * hu, v = el.v0 + (eta + 1.0) * hv;
  SurfacePoint sp = par.eval(u, v);
  const Vec3 a1 = sp.xu * hu, a2 = sp.xv * hv;
  const double g11 = a1.dot(a1), g12 = a1.dot(a2), g22 = a2.dot(a2);
  const double det = g11 * g22 - g12 * g12;
  const Vec3 d1 = (g22 * a1 - g12 * a2) / det;
  const Vec3 d2 = (g11 * a2 - g12 * a1) / det;
  q.x = sp.x;
  q.n = sp.normal;
  q.shape = sp.shape;
  const ShapeQ2 s2 = shape_q2(xi, eta);
  const ShapeQ1 s1 = shape_q1(xi, eta);
  for (int a = 0; a < 9; ++a) {
    q.phi2[a] = s2.N[a];
    q.grad2[a] = s2.dxi[a] * d1 + s2.deta[a] * d2;
  }
  for (int a = 0; a < 4; ++a) {
    q.phi1[a] = s1.N[a];
    q.grad1[a] = s1.dxi[a] * d1 + s1.deta[a] * d2;
  }
  if (a1_out) *a1_out = a1;
  if (a2_out) *a2_out = a2;
}

}  // namespace

BaseManifoldMesh build_patch_mesh(const PatchSpec& spec) {
  if (!spec.param) throw ConfigError("patch without parameterization");
  if (spec.nu < 1 || spec.nv < 1) throw ConfigError("patch with empty grid");
  BaseManifoldMesh m;
  m.case_id = spec.case_id;
  m.flat = spec.flat;
  m.characteristic_length = spec.characteristic_length;
  m.param = spec.param;

  const int nu = spec.nu, nv = spec.nv;
  const double hu = (spec.u1 - spec.u0) / nu, hv = (spec.v1 - spec.v0) / nv;
  auto cell_u = [&](int i) { return spec.u0 + (i + 0.5) * hu; };
  auto cell_v = [&](int j) { return spec.v0 + (j + 0.5) * hv; };

  std::vector<char> active(nu * nv, 0);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i)
      active[j * nu + i] = !spec.active || spec.active(cell_u(i), cell_v(j));
  auto is_active = [&](int i, int j) {
    if (spec.periodic_u) i = (i % nu + nu) % nu;
    if (i < 0 || i >= nu || j < 0 || j >= nv) return false;
    return active[j * nu + i] != 0;
  };

  // Q2 grid nodes
  const int gu = spec.periodic_u ? 2 * nu : 2 * nu + 1, gv = 2 * nv + 1;
  auto gid = [&](int I, int J) {
    if (spec.periodic_u) I %= gu;
    return J * gu + I;
  };
  std::vector<int> gmap(gu * gv, -1);
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i)
      if (active[j * nu + i])
        for (int b = 0; b < 3; ++b)
          for (int a = 0; a < 3; ++a) gmap[gid(2 * i + a, 2 * j + b)] = 0;
  for (int J = 0; J < gv; ++J)
    for (int I = 0; I < gu; ++I) {
      int& k = gmap[J * gu + I];
      if (k < 0) continue;
      k = static_cast<int>(m.nodes.size());
      const double u = spec.u0 + 0.5 * I * hu, v = spec.v0 + 0.5 * J * hv;
      m.nodes.push_back(spec.param->eval(u, v).x);
      m.node_uv.push_back({u, v});
      m.q2_to_q1.push_back((I % 2 == 0 && J % 2 == 0) ? 0 : -1);
    }
  for (int k = 0; k < m.num_q2(); ++k)
    if (m.q2_to_q1[k] >= 0) {
      m.q2_to_q1[k] = static_cast<int>(m.q1_nodes.size());
      m.q1_nodes.push_back(k);
    }

  // elements
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      if (!active[j * nu + i]) continue;
      Element el;
      for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a) el.q2[3 * b + a] = gmap[gid(2 * i + a, 2 * j + b)];
      for (int c = 0; c < 4; ++c) el.q1[c] = m.q2_to_q1[el.q2[kQ2Corner[c]]];
      el.u0 = spec.u0 + i * hu;
      el.u1 = el.u0 + hu;
      el.v0 = spec.v0 + j * hv;
      el.v1 = el.v0 + hv;
      el.fluid = spec.fluid && spec.fluid(cell_u(i), cell_v(j));
      m.elements.push_back(el);
    }

  // boundary edges and segments
  std::map<std::string, int> seg_index;
  int e = 0;
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      if (!active[j * nu + i]) continue;
      const int nb[4][2] = {{i, j - 1}, {i + 1, j}, {i, j + 1}, {i - 1, j}};
      for (int s = 0; s < 4; ++s) {
        if (is_active(nb[s][0], nb[s][1])) continue;
        const Element& el = m.elements[e];
        double um = 0.5 * (el.u0 + el.u1), vm = 0.5 * (el.v0 + el.v1);
        if (s == 0) vm = el.v0;
        if (s == 1) um = el.u1;
        if (s == 2) vm = el.v1;
        if (s == 3) um = el.u0;
        auto [name, tag] = spec.tag ? spec.tag(um, vm, s)
                                    : std::pair<std::string, BoundaryTag>{"wall", BoundaryTag::Wall};
        auto it = seg_index.find(name);
        if (it == seg_index.end()) {
          it = seg_index.emplace(name, static_cast<int>(m.segments.size())).first;
          m.segments.push_back(BoundarySegment{name, tag, {}, 0.0});
        } else if (m.segments[it->second].tag != tag) {
          throw ConfigError("segment '" + name + "' tagged inconsistently");
        }
        BoundaryEdge be;
        be.element = e;
        be.side = s;
        be.segment = it->second;
        for (int k = 0; k < 3; ++k) be.q2[k] = el.q2[kSideQ2[s][k]];
        be.q1 = {m.q2_to_q1[be.q2[0]], m.q2_to_q1[be.q2[2]]};
        m.segments[it->second].edges.push_back(static_cast<int>(m.edges.size()));
        m.edges.push_back(be);
      }
      ++e;
    }

  // quadrature
  const GaussRule g = gauss_legendre(3);
  m.qp.resize(static_cast<size_t>(m.num_elements()) * kQP);
  for (int el = 0; el < m.num_elements(); ++el)
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a) {
        QuadPoint& q = m.qp[el * kQP + 3 * b + a];
        Vec3 a1, a2;
        fill_point(*spec.param, m.elements[el], g.x[a], g.x[b], q, &a1, &a2);
        q.w = g.w[a] * g.w[b] * a1.cross(a2).norm();
      }
  m.eqp.resize(m.edges.size() * kEQP);
  for (size_t bi = 0; bi < m.edges.size(); ++bi) {
    const BoundaryEdge& be = m.edges[bi];
    double len = 0.0;
    for (int k = 0; k < kEQP; ++k) {
      EdgeQuadPoint& q = m.eqp[bi * kEQP + k];
      const auto r = side_point(be.side, g.x[k]);
      Vec3 a1, a2;
      fill_point(*spec.param, m.elements[be.element], r[0], r[1], q, &a1, &a2);
      const Vec3 t = (be.side % 2 == 0) ? a1 : a2;
      Vec3 out = (be.side == 0) ? -a2 : (be.side == 1) ? a1 : (be.side == 2) ? a2 : -a1;
      q.w = g.w[k] * t.norm();
      q.tangent = t.normalized();
      out -= out.dot(q.tangent) * q.tangent;
      out -= out.dot(q.n) * q.n;
      q.conormal = out.normalized();
      len += q.w;
    }
    m.segments[be.segment].length += len;
  }
  return m;
}

}  // namespace mto
