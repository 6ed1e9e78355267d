#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mto/io.hpp"
#include "mto/version.hpp"

namespace fs = std::filesystem;
using namespace mto;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

std::string numbered(const std::string& stem, int iter, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d", iter);
  return stem + buf + ext;
}

void export_fields(const fs::path& dir, int iter, const Problem& problem, const Evaluation& ev) {
  const NodalFields f = nodal_fields(problem, ev);
  write_vtk((dir / numbered("fields", iter, ".vtk")).string(), problem.mesh(), f, false);
  write_vtk((dir / numbered("fields", iter, "_mapped.vtk")).string(), problem.mesh(), f, true);
}

IterationRecord record_of(const Evaluation& ev, int iter, double J0, double beta, const OptimizationConfig& oc) {
  IterationRecord r;
  r.iter = iter;
  r.J = ev.obj.J;
  r.Jn = ev.obj.J / J0;
  r.s = ev.area.s;
  r.v = ev.v;
  r.beta = beta;
  const Eigen::Vector3d g = constraint_values(r.s, r.v, oc);
  r.g_area = g[0];
  r.g_vol_hi = g[1];
  r.g_vol_lo = g[2];
  r.newton_iters = ev.flow.newton_iters;
  return r;
}

void write_result(const fs::path& dir, const nlohmann::json& j) {
  std::ofstream out(dir / "result.json");
  out << j.dump(2) << "\n";
}

int run(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + cfg.output_dir + "'");
  {
    std::ofstream probe(dir / "manifest.json");
    if (!probe) throw ConfigError("output directory '" + cfg.output_dir + "' is not writable");
  }
  write_manifest((dir / "manifest.json").string(), cfg);
  set_num_threads(cfg.threads);

  Problem problem(build_case(cfg.problem.case_spec), cfg.problem);
  const OptimizationConfig& oc = cfg.opt;
  std::printf("case %s: %d elements, %d design variables, mode %s\n", problem.mesh().case_id.c_str(),
              problem.mesh().num_elements(), problem.num_design(), to_string(cfg.mode).c_str());

  if (cfg.mode == RunMode::ForwardOnly) {
    HistoryWriter hist((dir / "history.csv").string());
    const VecX x = problem.initial_design(oc.s0, oc.v0);
    const Evaluation ev = problem.evaluate(x);
    const IterationRecord r = record_of(ev, 1, ev.obj.J, cfg.problem.filter.beta, oc);
    hist.write(r);
    export_fields(dir, 0, problem, ev);
    const FlowDiagnostics d = flow_diagnostics(ev.ctx, problem.flow_solver(), ev.flow.U);
    std::printf("J = %.10g  s = %.6f  v = %.3e  newton = %d  max|u| = %.6g  max|u.n| = %.3e\n", r.J, r.s, r.v,
                r.newton_iters, d.max_speed, d.max_tangential);
    write_result(dir, {{"mode", "forward_only"},
                       {"J", r.J},
                       {"dissipation", ev.obj.dissipation},
                       {"darcy", ev.obj.darcy},
                       {"pressure_drop", ev.obj.pressure_drop},
                       {"s", r.s},
                       {"v", r.v},
                       {"newton_iters", r.newton_iters},
                       {"max_speed", d.max_speed},
                       {"max_tangential", d.max_tangential}});
    return kExitOk;
  }

  if (cfg.mode == RunMode::Gradcheck) {
    VecX x = problem.initial_design(oc.s0, oc.v0);
    std::mt19937 rng(cfg.seed);
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    for (int i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i] + jitter(rng), 0.0, 1.0);
    const Evaluation ev = problem.evaluate(x);
    export_fields(dir, 0, problem, ev);
    {
      HistoryWriter hist((dir / "history.csv").string());
      hist.write(record_of(ev, 1, ev.obj.J, cfg.problem.filter.beta, oc));
    }
    const auto rows = gradient_check(problem, x, cfg.gradcheck.directions, cfg.gradcheck.h, cfg.seed + 1);
    write_gradcheck_csv((dir / "gradcheck.csv").string(), rows);
    bool ok = true;
    double worst = 0.0;
    for (const GradcheckRow& r : rows) {
      const double tol = r.response == "v" ? 1e-6 : 1e-3;
      worst = std::max(worst, r.rel_err);
      if (r.rel_err > tol) ok = false;
      std::printf("%-2s %-6s dir %d  analytic % .10e  fd % .10e  rel %.2e\n", r.response.c_str(), r.variable.c_str(),
                  r.direction, r.analytic, r.fd, r.rel_err);
    }
    std::printf("gradcheck %s (max rel_err %.3e)\n", ok ? "passed" : "FAILED", worst);
    write_result(dir, {{"mode", "gradcheck"}, {"passed", ok}, {"max_rel_err", worst}});
    return ok ? kExitOk : kExitCheckFailed;
  }

  HistoryWriter hist((dir / "history.csv").string());
  LoopCallbacks cb;
  cb.on_iteration = [&](const IterationRecord& r, const Evaluation& ev, const VecX&) {
    hist.write(r);
    if (r.iter == 1) export_fields(dir, 0, problem, ev);
    std::printf("%4d  J %.6e  J/J0 %.6f  s %.5f  v % .3e  beta %g  newton %d\n", r.iter, r.J, r.Jn, r.s, r.v, r.beta,
                r.newton_iters);
    std::fflush(stdout);
  };
  cb.on_beta_change = [&](int iter, double beta, const Evaluation&, const VecX& xn) {
    write_checkpoint((dir / numbered("checkpoint", iter, ".json")).string(), problem, xn, iter, beta);
  };
  cb.on_failure = [&](int iter, const VecX& x) {
    write_checkpoint((dir / "checkpoint_failure.json").string(), problem, x, iter, problem.config().filter.beta);
  };
  const LoopResult res = run_loop(problem, oc, cb);
  const IterationRecord& last = res.history.back();
  export_fields(dir, last.iter, problem, res.final_eval);
  write_checkpoint((dir / "final_design.json").string(), problem, res.x, last.iter, last.beta);
  std::printf("stopped: %s after %d iterations, J = %.10g, s = %.6f, v = %.3e\n", to_string(res.reason).c_str(),
              last.iter, last.J, last.s, last.v);
  write_result(dir, {{"mode", "optimize"},
                     {"stop_reason", to_string(res.reason)},
                     {"iterations", last.iter},
                     {"J", last.J},
                     {"Jn", last.Jn},
                     {"s", last.s},
                     {"v", last.v},
                     {"beta", last.beta}});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-based topology optimization of flow on offset surfaces"};
  std::string config_path, mode, output_dir, case_id;
  int max_iters = 0, threads = 0, resolution = 0;
  app.add_option("--config", config_path, "JSON run configuration (or a manifest.json)");
  app.add_option("--mode", mode, "optimize | gradcheck | forward_only");
  app.add_option("--output-dir", output_dir, "directory for result files");
  app.add_option("--case", case_id, "case id override");
  app.add_option("--resolution", resolution, "resolution override");
  app.add_option("--max-iters", max_iters, "iteration cap override");
  app.add_option("--threads", threads, "assembly threads (fallback: MANIFOLD_TOPOPT_THREADS)");
  app.set_version_flag("--version", std::string(kVersion));
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    RunConfig cfg = config_path.empty() ? parse_config("{}", "<defaults>") : load_config(config_path);
    if (!mode.empty()) cfg.mode = parse_mode(mode);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (!case_id.empty()) cfg.problem.case_spec.case_id = case_id;
    if (resolution != 0) {
      if (resolution < 8) throw ConfigError("--resolution must be at least 8");
      cfg.problem.case_spec.resolution = resolution;
    }
    if (max_iters != 0) {
      if (max_iters < 1) throw ConfigError("--max-iters must be positive");
      cfg.opt.n_max = max_iters;
    }
    if (threads != 0) {
      cfg.threads = threads;
    } else if (const char* env = std::getenv("MANIFOLD_TOPOPT_THREADS"); env && *env) {
      char* end = nullptr;
      const long t = std::strtol(env, &end, 10);
      if (*end != '\0' || t < 1) throw ConfigError("MANIFOLD_TOPOPT_THREADS must be a positive integer");
      cfg.threads = static_cast<int>(t);
    }
    if (cfg.threads < 1) throw ConfigError("--threads must be positive");
    return run(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const GeometryError& e) {
    std::fprintf(stderr, "solver failure (geometry): %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
}
