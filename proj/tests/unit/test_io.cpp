#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mto/io.hpp"
#include "support/problems.hpp"

using namespace mto;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("mto_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults") {
  const RunConfig c = parse_config("{}");
  CHECK(c.problem.case_spec.case_id == "bending_channel");
  CHECK(c.problem.omega == 0.9);
  CHECK(c.problem.filter.r_f == 1.0 / 50.0);
  CHECK(c.problem.filter.r_m == 2.0 / 25.0);
  CHECK(c.problem.filter.xi == 0.5);
  CHECK(c.problem.material.alpha_s == 1e4);
  CHECK(c.opt.n_max == 240);
  CHECK(c.opt.beta_max == 128.0);
  CHECK(c.opt.beta_interval == 30);
  CHECK(c.opt.s0 == 0.3);
  CHECK(c.mode == RunMode::Optimize);
  CHECK(c.threads == 1);
}

TEST_CASE("alpha_s follows the density") {
  const RunConfig c = parse_config(R"({"fluid": {"rho": 2.5}})");
  CHECK(c.problem.material.alpha_s == 2.5e4);
}

TEST_CASE("config errors name the offending key") {
  CHECK(error_of(R"({"case": {"idd": "x"}})").find("case.idd") != std::string::npos);
  CHECK(error_of(R"({"fluid": {"rho": "heavy"}})").find("fluid.rho") != std::string::npos);
  CHECK(error_of(R"({"optimization": {"mma": {"move": true}}})").find("optimization.mma.move") !=
        std::string::npos);
  CHECK(error_of(R"({"mode": "fly"})").find("fly") != std::string::npos);
  CHECK(error_of(R"({"fluid": {"eta": -1}})").find("eta") != std::string::npos);
  CHECK(error_of(R"({"optimization": {"s0": 1.5}})").find("s0") != std::string::npos);
  CHECK(error_of("{ not json").find("cfg.json") != std::string::npos);
  CHECK(error_of(R"({"case": {"id": "torus"}})") != "" );
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), ConfigError);
}

TEST_CASE("manifest round trip") {
  RunConfig c = parse_config(R"({"case": {"id": "square_sphere", "resolution": 12, "t": 0.25,
      "params": {"curvature": 1.5}}, "filter": {"A_d": 0.1}, "mode": "gradcheck", "seed": 7,
      "optimization": {"s0": 0.4, "mma": {"move": 0.1}}})");
  const fs::path d = scratch("manifest");
  write_manifest((d / "manifest.json").string(), c);
  const RunConfig r = load_config((d / "manifest.json").string());
  CHECK(config_to_json(r) == config_to_json(c));
  CHECK(r.problem.case_spec.params.at("curvature") == 1.5);
  CHECK(r.mode == RunMode::Gradcheck);
  CHECK(r.seed == 7u);
  CHECK(r.opt.mma.move == 0.1);
  CHECK(to_string(parse_mode("forward_only")) == "forward_only");
}

TEST_CASE("history round trip") {
  const fs::path d = scratch("history");
  std::vector<IterationRecord> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].iter = i + 1;
    rows[i].J = 1.0 / 3.0 + i;
    rows[i].Jn = rows[i].J / rows[0].J;
    rows[i].s = 0.1 * i + 1e-17;
    rows[i].v = -2.5e-4 * i;
    rows[i].beta = 1 << i;
    rows[i].newton_iters = 4 - i;
  }
  {
    HistoryWriter w((d / "history.csv").string());
    for (const auto& r : rows) w.write(r);
  }
  CHECK(slurp(d / "history.csv").rfind("iter,J,Jn,s,v,beta,newton_iters\n", 0) == 0);
  const auto back = read_history((d / "history.csv").string());
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back[i].iter == rows[i].iter);
    CHECK(back[i].J == rows[i].J);
    CHECK(back[i].Jn == rows[i].Jn);
    CHECK(back[i].s == rows[i].s);
    CHECK(back[i].v == rows[i].v);
    CHECK(back[i].beta == rows[i].beta);
    CHECK(back[i].newton_iters == rows[i].newton_iters);
  }
}

TEST_CASE("vtk export") {
  auto p = test::problem(test::config("square_sphere", 8, 0.0, 0.5));
  const Evaluation ev = p->evaluate(test::jittered(*p, 0.5, 0.0, 0.3, 8));
  const NodalFields f = nodal_fields(*p, ev);
  const BaseManifoldMesh& m = p->mesh();
  const fs::path d = scratch("vtk");
  write_vtk((d / "a.vtk").string(), m, f, false);
  write_vtk((d / "b.vtk").string(), m, f, true);
  // zero offset: mapped file equals the base-manifold file
  CHECK(slurp(d / "a.vtk") == slurp(d / "b.vtk"));

  const VtkData v = read_vtk((d / "a.vtk").string());
  REQUIRE(v.points.size() == static_cast<size_t>(m.num_q2()));
  CHECK(v.cells.size() == 4 * m.elements.size());
  for (const char* name : {"gamma", "gamma_f", "gamma_p", "d_m", "d_f", "p", "lambda"})
    REQUIRE(v.scalars.count(name) == 1);
  REQUIRE(v.vectors.count("u") == 1);
  for (int i = 0; i < m.num_q2(); ++i) {
    CHECK(v.points[i] == m.nodes[i]);
    CHECK(v.scalars.at("gamma_f")[i] == f.gamma_f[i]);
    CHECK(v.scalars.at("p")[i] == f.p[i]);
    CHECK(v.vectors.at("u")[i] == f.u[i]);
  }
  write_vtk((d / "c.vtk").string(), m, nodal_fields(*p, ev), false);
  CHECK(slurp(d / "a.vtk") == slurp(d / "c.vtk"));
}

TEST_CASE("mapped vtk moves points along the normal") {
  auto p = test::problem(test::config("bending_channel", 8, 0.5));
  const Evaluation ev = p->evaluate(test::jittered(*p, 0.5, 0.0, 0.3, 8), false);
  const NodalFields f = nodal_fields(*p, ev);
  const fs::path d = scratch("vtk_mapped");
  write_vtk((d / "m.vtk").string(), p->mesh(), f, true);
  const VtkData v = read_vtk((d / "m.vtk").string());
  for (int i = 0; i < p->mesh().num_q2(); ++i) {
    const Vec3 expect = p->mesh().nodes[i] + Vec3(0, 0, f.d_f[i]);
    CHECK((v.points[i] - expect).norm() < 1e-15);
  }
}

TEST_CASE("checkpoint round trip") {
  auto p = test::problem(test::config("bending_channel", 8, 1.0));
  const VecX x = test::jittered(*p, 0.3, 0.0, 0.2, 4);
  const fs::path d = scratch("ckpt");
  write_checkpoint((d / "c.json").string(), *p, x, 30, 2.0);
  int it = 0;
  double beta = 0.0;
  const VecX y = read_checkpoint((d / "c.json").string(), &it, &beta);
  CHECK(it == 30);
  CHECK(beta == 2.0);
  REQUIRE(y.size() == x.size());
  CHECK((x - y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradcheck csv") {
  const fs::path d = scratch("gc");
  std::vector<GradcheckRow> rows(2);
  rows[0] = {"J", "gamma", 0, 1.0, 1.0 + 1e-9, 1e-9};
  rows[1] = {"v", "d_m", 4, 0.5, 0.5, 0.0};
  write_gradcheck_csv((d / "g.csv").string(), rows);
  const std::string s = slurp(d / "g.csv");
  CHECK(s.rfind("response,variable,direction,analytic,fd,rel_err\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 3);
}
