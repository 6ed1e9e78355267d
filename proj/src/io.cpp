#include "mto/io.hpp"

#include <Eigen/Core>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mto/quadrature.hpp"
#include "mto/version.hpp"

namespace mto {

using json = nlohmann::json;

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Gradcheck: return "gradcheck";
    case RunMode::ForwardOnly: return "forward_only";
    default: return "optimize";
  }
}

RunMode parse_mode(const std::string& s) {
  if (s == "optimize") return RunMode::Optimize;
  if (s == "gradcheck") return RunMode::Gradcheck;
  if (s == "forward_only") return RunMode::ForwardOnly;
  throw ConfigError("mode: expected optimize, gradcheck or forward_only, got '" + s + "'");
}

namespace {

// Strict reader: every key must be known and correctly typed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where("") + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void get(const std::string& key, double& v) {
    if (!take(key)) return;
    const json& x = j_.at(key);
    if (!x.is_number()) throw ConfigError(where(key) + ": expected a number");
    v = x.get<double>();
  }
  void get(const std::string& key, int& v) {
    if (!take(key)) return;
    const json& x = j_.at(key);
    if (!x.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    v = x.get<int>();
  }
  void get(const std::string& key, unsigned& v) {
    if (!take(key)) return;
    const json& x = j_.at(key);
    if (!x.is_number_integer() || x.get<long long>() < 0)
      throw ConfigError(where(key) + ": expected a non-negative integer");
    v = x.get<unsigned>();
  }
  void get(const std::string& key, bool& v) {
    if (!take(key)) return;
    const json& x = j_.at(key);
    if (!x.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    v = x.get<bool>();
  }
  void get(const std::string& key, std::string& v) {
    if (!take(key)) return;
    const json& x = j_.at(key);
    if (!x.is_string()) throw ConfigError(where(key) + ": expected a string");
    v = x.get<std::string>();
  }
  void get(const std::string& key, std::map<std::string, double>& v) {
    if (!take(key)) return;
    const json& x = j_.at(key);
    if (!x.is_object()) throw ConfigError(where(key) + ": expected an object of numbers");
    for (auto it = x.begin(); it != x.end(); ++it) {
      if (!it->is_number()) throw ConfigError(where(key) + "." + it.key() + ": expected a number");
      v[it.key()] = it->get<double>();
    }
  }
  bool sub(const std::string& key, const std::function<void(Section&)>& fn) {
    if (!take(key)) return false;
    Section s(j_.at(key), where(key));
    fn(s);
    s.finish();
    return true;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
  }
  std::string where(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  bool take(const std::string& key) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    return true;
  }
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void validate(const RunConfig& c) {
  const CaseSpec& cs = c.problem.case_spec;
  static const std::set<std::string> known = {"bending_channel", "four_terminal", "square_sphere",
                                              "cylinder_strip",  "channel",       "sphere"};
  require(known.count(cs.case_id) == 1, "case.id '" + cs.case_id + "' is not a known case");
  require(cs.resolution >= 8, "case.resolution must be at least 8");
  require(cs.t >= 0.0 && cs.t <= 1.0, "case.t must lie in [0, 1]");
  require(cs.U0 >= 0.0, "case.U0 must be non-negative");
  require(c.problem.fluid.rho > 0.0, "fluid.rho must be positive");
  require(c.problem.fluid.eta > 0.0, "fluid.eta must be positive");
  c.problem.filter.validate();
  require(c.problem.material.q > 0.0, "material.q must be positive");
  require(c.problem.omega >= 0.0 && c.problem.omega <= 1.0, "optimization.omega must lie in [0, 1]");
  require(c.problem.eps0 > 0.0, "geometry.eps0 must be positive");
  require(c.opt.s0 > 0.0 && c.opt.s0 < 1.0, "optimization.s0 must lie in (0, 1)");
  require(c.opt.v0 >= 0.0 && c.opt.v0 < 1.0, "optimization.v0 must lie in [0, 1)");
  require(c.opt.n_max >= 1, "optimization.n_max must be at least 1");
  require(c.opt.beta_interval >= 1, "optimization.beta_interval must be at least 1");
  require(c.opt.stall_window >= 1, "optimization.stall_window must be at least 1");
  require(c.opt.beta_max >= c.opt.beta_init, "optimization.beta_max must not be below beta_init");
  require(c.opt.mma.move > 0.0 && c.opt.mma.move <= 1.0, "optimization.mma.move must lie in (0, 1]");
  require(c.opt.mma.asymin > 0.0 && c.opt.mma.asymin < c.opt.mma.asyinit, "optimization.mma.asymin must lie in (0, asyinit)");
  require(c.gradcheck.directions >= 1, "gradcheck.directions must be at least 1");
  require(c.gradcheck.h > 0.0, "gradcheck.h must be positive");
  require(c.threads >= 1, "threads must be at least 1");
  require(!c.output_dir.empty(), "output_dir must not be empty");
  require(c.problem.solver.max_newton >= 1, "solver.max_newton must be at least 1");
}

RunConfig from_json(const json& root) {
  RunConfig c;
  Section top(root, "");
  ProblemConfig& p = c.problem;
  top.sub("case", [&](Section& s) {
    s.get("id", p.case_spec.case_id);
    s.get("resolution", p.case_spec.resolution);
    s.get("U0", p.case_spec.U0);
    s.get("t", p.case_spec.t);
    s.get("params", p.case_spec.params);
  });
  p.fluid.U0 = p.case_spec.U0;
  top.sub("fluid", [&](Section& s) {
    s.get("rho", p.fluid.rho);
    s.get("eta", p.fluid.eta);
  });
  p.material.alpha_s = 1e4 * p.fluid.rho;
  top.sub("material", [&](Section& s) {
    s.get("alpha_s", p.material.alpha_s);
    s.get("alpha_f", p.material.alpha_f);
    s.get("q", p.material.q);
  });
  top.sub("filter", [&](Section& s) {
    s.get("r_f", p.filter.r_f);
    s.get("r_m", p.filter.r_m);
    s.get("A_d", p.filter.A_d);
    s.get("xi", p.filter.xi);
  });
  top.sub("geometry", [&](Section& s) { s.get("eps0", p.eps0); });
  top.sub("solver", [&](Section& s) {
    s.get("max_newton", p.solver.max_newton);
    s.get("rtol", p.solver.rtol);
    s.get("atol", p.solver.atol);
    s.get("polish", p.solver.polish);
    s.get("max_halvings", p.solver.max_halvings);
    s.get("lambda_sign", p.solver.lambda_sign);
    s.get("verbose", p.solver.verbose);
  });
  OptimizationConfig& o = c.opt;
  top.sub("optimization", [&](Section& s) {
    s.get("s0", o.s0);
    s.get("v0", o.v0);
    s.get("omega", p.omega);
    s.get("n_max", o.n_max);
    s.get("beta_init", o.beta_init);
    s.get("beta_max", o.beta_max);
    s.get("beta_interval", o.beta_interval);
    s.get("stall_tol", o.stall_tol);
    s.get("stall_window", o.stall_window);
    s.get("volume_tol", o.volume_tol);
    s.sub("mma", [&](Section& m) {
      m.get("move", o.mma.move);
      m.get("asyinit", o.mma.asyinit);
      m.get("asydecr", o.mma.asydecr);
      m.get("asyincr", o.mma.asyincr);
      m.get("asymin", o.mma.asymin);
      m.get("albefa", o.mma.albefa);
      m.get("raa0", o.mma.raa0);
      m.get("epsimin", o.mma.epsimin);
      m.get("a0", o.mma.a0);
      m.get("c", o.mma.c);
      m.get("d", o.mma.d);
    });
  });
  p.filter.beta = o.beta_init;
  top.sub("gradcheck", [&](Section& s) {
    s.get("directions", c.gradcheck.directions);
    s.get("h", c.gradcheck.h);
  });
  std::string mode = to_string(c.mode);
  top.get("mode", mode);
  c.mode = parse_mode(mode);
  top.get("output_dir", c.output_dir);
  top.get("threads", c.threads);
  top.get("seed", c.seed);
  top.finish();
  validate(c);
  return c;
}

json to_json_obj(const RunConfig& c) {
  const ProblemConfig& p = c.problem;
  const OptimizationConfig& o = c.opt;
  json j;
  j["case"] = {{"id", p.case_spec.case_id},
               {"resolution", p.case_spec.resolution},
               {"U0", p.case_spec.U0},
               {"t", p.case_spec.t},
               {"params", p.case_spec.params}};
  j["fluid"] = {{"rho", p.fluid.rho}, {"eta", p.fluid.eta}};
  j["material"] = {{"alpha_s", p.material.alpha_s}, {"alpha_f", p.material.alpha_f}, {"q", p.material.q}};
  j["filter"] = {{"r_f", p.filter.r_f}, {"r_m", p.filter.r_m}, {"A_d", p.filter.A_d}, {"xi", p.filter.xi}};
  j["geometry"] = {{"eps0", p.eps0}};
  j["solver"] = {{"max_newton", p.solver.max_newton}, {"rtol", p.solver.rtol},
                 {"atol", p.solver.atol},             {"polish", p.solver.polish},
                 {"max_halvings", p.solver.max_halvings}, {"lambda_sign", p.solver.lambda_sign},
                 {"verbose", p.solver.verbose}};
  j["optimization"] = {{"s0", o.s0},
                       {"v0", o.v0},
                       {"omega", p.omega},
                       {"n_max", o.n_max},
                       {"beta_init", o.beta_init},
                       {"beta_max", o.beta_max},
                       {"beta_interval", o.beta_interval},
                       {"stall_tol", o.stall_tol},
                       {"stall_window", o.stall_window},
                       {"volume_tol", o.volume_tol},
                       {"mma",
                        {{"move", o.mma.move},
                         {"asyinit", o.mma.asyinit},
                         {"asydecr", o.mma.asydecr},
                         {"asyincr", o.mma.asyincr},
                         {"asymin", o.mma.asymin},
                         {"albefa", o.mma.albefa},
                         {"raa0", o.mma.raa0},
                         {"epsimin", o.mma.epsimin},
                         {"a0", o.mma.a0},
                         {"c", o.mma.c},
                         {"d", o.mma.d}}}};
  j["gradcheck"] = {{"directions", c.gradcheck.directions}, {"h", c.gradcheck.h}};
  j["mode"] = to_string(c.mode);
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["seed"] = c.seed;
  return j;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (j.is_object() && j.contains("config") && j.contains("versions")) j = j["config"];
  try {
    return from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_to_json(const RunConfig& cfg, int indent) { return to_json_obj(cfg).dump(indent); }

void write_manifest(const std::string& path, const RunConfig& cfg) {
  json j;
  j["config"] = to_json_obj(cfg);
  j["versions"] = {{"manifold_topopt", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                 "." + std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"sparse_lu", SparseLU::backend()},
                   {"compiler", __VERSION__}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

HistoryWriter::HistoryWriter(const std::string& path) {
  f_ = std::fopen(path.c_str(), "w");
  if (!f_) throw Error("cannot write '" + path + "'");
  std::fprintf(f_, "iter,J,Jn,s,v,beta,newton_iters\n");
  std::fflush(f_);
}

HistoryWriter::~HistoryWriter() {
  if (f_) std::fclose(f_);
}

void HistoryWriter::write(const IterationRecord& r) {
  std::fprintf(f_, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.iter, r.J, r.Jn, r.s, r.v, r.beta, r.newton_iters);
  std::fflush(f_);
}

std::vector<IterationRecord> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    IterationRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%d", &r.iter, &r.J, &r.Jn, &r.s, &r.v, &r.beta,
                    &r.newton_iters) != 7)
      throw Error("malformed history line: " + line);
    out.push_back(r);
  }
  return out;
}

NodalFields nodal_fields(const BaseManifoldMesh& mesh, const DofMap& dofs, const DesignState& ds, const VecX* U,
                         double beta, double xi) {
  const int n2 = mesh.num_q2();
  NodalFields f;
  f.gamma = VecX::Zero(n2);
  f.gamma_f = VecX::Zero(n2);
  f.gamma_p = VecX::Zero(n2);
  f.p = VecX::Zero(n2);
  f.lambda = VecX::Zero(n2);
  f.d_m = ds.d_m;
  f.d_f = ds.d_f;
  f.u.assign(n2, Vec3::Zero());
  std::vector<char> fluid(n2, 0);
  for (const Element& el : mesh.elements)
    for (int a = 0; a < 9; ++a) {
      const int node = el.q2[a];
      const ShapeQ1 s = shape_q1(static_cast<double>(a % 3) - 1.0, static_cast<double>(a / 3) - 1.0);
      double g = 0, gf = 0, p = 0, l = 0;
      for (int b = 0; b < 4; ++b) {
        const int k = el.q1[b];
        g += s.N[b] * ds.gamma[k];
        gf += s.N[b] * ds.gamma_f[k];
        if (U) {
          p += s.N[b] * (*U)[dofs.p(k)];
          l += s.N[b] * (*U)[dofs.lam(k)];
        }
      }
      f.gamma[node] = g;
      f.gamma_f[node] = gf;
      f.p[node] = p;
      f.lambda[node] = l;
      if (el.fluid) fluid[node] = 1;
    }
  for (int i = 0; i < n2; ++i) {
    f.gamma_p[i] = fluid[i] ? 1.0 : project(f.gamma_f[i], beta, xi);
    if (U)
      for (int c = 0; c < 3; ++c) f.u[i][c] = (*U)[dofs.u(i, c)];
  }
  return f;
}

NodalFields nodal_fields(const Problem& problem, const Evaluation& ev) {
  return nodal_fields(problem.mesh(), problem.flow_solver().dofs(), ev.design, ev.has_flow ? &ev.flow.U : nullptr,
                      problem.config().filter.beta, problem.config().filter.xi);
}

void write_vtk(const std::string& path, const BaseManifoldMesh& mesh, const NodalFields& f, bool displaced) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw Error("cannot write '" + path + "'");
  const int n = mesh.num_q2();
  std::fprintf(out, "# vtk DataFile Version 3.0\nmanifold_topopt %s\nASCII\nDATASET UNSTRUCTURED_GRID\n",
               mesh.case_id.c_str());
  std::fprintf(out, "POINTS %d double\n", n);
  for (int i = 0; i < n; ++i) {
    Vec3 x = mesh.nodes[i];
    if (displaced && f.d_f.size() == n && f.d_f[i] != 0.0) {
      const SurfacePoint sp = mesh.param->eval(mesh.node_uv[i][0], mesh.node_uv[i][1]);
      x += f.d_f[i] * sp.normal;
    }
    std::fprintf(out, "%.17g %.17g %.17g\n", x[0], x[1], x[2]);
  }
  const int nc = 4 * mesh.num_elements();
  std::fprintf(out, "CELLS %d %d\n", nc, 5 * nc);
  for (const Element& el : mesh.elements)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        const int a = 3 * j + i;
        std::fprintf(out, "4 %d %d %d %d\n", el.q2[a], el.q2[a + 1], el.q2[a + 4], el.q2[a + 3]);
      }
  std::fprintf(out, "CELL_TYPES %d\n", nc);
  for (int c = 0; c < nc; ++c) std::fprintf(out, "9\n");
  std::fprintf(out, "POINT_DATA %d\n", n);
  auto scalar = [&](const char* name, const VecX& v) {
    if (v.size() != n) return;
    std::fprintf(out, "SCALARS %s double 1\nLOOKUP_TABLE default\n", name);
    for (int i = 0; i < n; ++i) std::fprintf(out, "%.17g\n", v[i]);
  };
  scalar("gamma", f.gamma);
  scalar("gamma_f", f.gamma_f);
  scalar("gamma_p", f.gamma_p);
  scalar("d_m", f.d_m);
  scalar("d_f", f.d_f);
  scalar("p", f.p);
  scalar("lambda", f.lambda);
  if (static_cast<int>(f.u.size()) == n) {
    std::fprintf(out, "VECTORS u double\n");
    for (const Vec3& u : f.u) std::fprintf(out, "%.17g %.17g %.17g\n", u[0], u[1], u[2]);
  }
  const bool ok = std::ferror(out) == 0;
  if (std::fclose(out) != 0 || !ok) throw Error("failed writing '" + path + "'");
}

VtkData read_vtk(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path + "'");
  std::string line;
  for (int i = 0; i < 4; ++i) std::getline(in, line);  // header, title, ASCII, DATASET
  VtkData d;
  std::string tok;
  auto num = [&]() {
    in >> tok;
    return std::strtod(tok.c_str(), nullptr);
  };
  int np = 0;
  while (in >> tok) {
    if (tok == "POINTS") {
      in >> np >> tok;
      d.points.resize(np);
      for (auto& p : d.points)
        for (int c = 0; c < 3; ++c) p[c] = num();
    } else if (tok == "CELLS") {
      int nc = 0, total = 0;
      in >> nc >> total;
      d.cells.resize(nc);
      for (auto& c : d.cells) {
        int k = 0;
        in >> k;
        if (k != 4) throw Error("read_vtk: only quads are supported");
        for (int& v : c) in >> v;
      }
    } else if (tok == "CELL_TYPES") {
      int nc = 0;
      in >> nc;
      for (int i = 0; i < nc; ++i) in >> tok;
    } else if (tok == "POINT_DATA") {
      in >> np;
    } else if (tok == "SCALARS") {
      std::string name;
      in >> name >> tok >> tok;  // type, components
      in >> tok >> tok;          // LOOKUP_TABLE default
      auto& v = d.scalars[name];
      v.resize(np);
      for (double& x : v) x = num();
    } else if (tok == "VECTORS") {
      std::string name;
      in >> name >> tok;
      auto& v = d.vectors[name];
      v.resize(np);
      for (auto& x : v)
        for (int c = 0; c < 3; ++c) x[c] = num();
    } else {
      throw Error("read_vtk: unexpected token '" + tok + "'");
    }
  }
  return d;
}

void write_checkpoint(const std::string& path, const Problem& problem, const VecX& x, int iter, double beta) {
  json j;
  j["iter"] = iter;
  j["beta"] = beta;
  j["gamma_nodes"] = problem.gamma_nodes();
  j["gamma"] = std::vector<double>(x.data(), x.data() + problem.num_gamma());
  j["d_m"] = std::vector<double>(x.data() + problem.num_gamma(), x.data() + x.size());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump() << "\n";
}

VecX read_checkpoint(const std::string& path, int* iter, double* beta) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read '" + path + "'");
  const json j = json::parse(in);
  const auto g = j.at("gamma").get<std::vector<double>>();
  const auto d = j.at("d_m").get<std::vector<double>>();
  VecX x(g.size() + d.size());
  for (size_t i = 0; i < g.size(); ++i) x[i] = g[i];
  for (size_t i = 0; i < d.size(); ++i) x[g.size() + i] = d[i];
  if (iter) *iter = j.at("iter").get<int>();
  if (beta) *beta = j.at("beta").get<double>();
  return x;
}

void write_gradcheck_csv(const std::string& path, const std::vector<GradcheckRow>& rows) {
  std::FILE* out = std::fopen(path.c_str(), "w");
  if (!out) throw Error("cannot write '" + path + "'");
  std::fprintf(out, "response,variable,direction,analytic,fd,rel_err\n");
  for (const GradcheckRow& r : rows)
    std::fprintf(out, "%s,%s,%d,%s,%s,%s\n", r.response.c_str(), r.variable.c_str(), r.direction,
                 fmt(r.analytic).c_str(), fmt(r.fd).c_str(), fmt(r.rel_err).c_str());
  std::fclose(out);
}

}  // namespace mto
