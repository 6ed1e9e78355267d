#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mto/io.hpp"
#include "mto/version.hpp"

namespace py = pybind11;
using namespace mto;

namespace {

Eigen::MatrixXd nodes_array(const BaseManifoldMesh& m) {
  Eigen::MatrixXd a(m.num_q2(), 3);
  for (int i = 0; i < m.num_q2(); ++i) a.row(i) = m.nodes[i].transpose();
  return a;
}

py::dict record_dict(const IterationRecord& r) {
  py::dict d;
  d["iter"] = r.iter;
  d["J"] = r.J;
  d["Jn"] = r.Jn;
  d["s"] = r.s;
  d["v"] = r.v;
  d["beta"] = r.beta;
  d["newton_iters"] = r.newton_iters;
  return d;
}

py::dict evaluation_dict(const Problem& p, const Evaluation& ev) {
  py::dict d;
  d["s"] = ev.area.s;
  d["area"] = ev.area.area_gamma;
  d["v"] = ev.v;
  d["gamma_f"] = ev.design.gamma_f;
  d["d_f"] = ev.design.d_f;
  if (ev.has_flow) {
    const DofMap& dofs = p.flow_solver().dofs();
    d["J"] = ev.obj.J;
    d["dissipation"] = ev.obj.dissipation;
    d["darcy"] = ev.obj.darcy;
    d["pressure_drop"] = ev.obj.pressure_drop;
    d["newton_iters"] = ev.flow.newton_iters;
    Eigen::MatrixXd u(dofs.n2, 3);
    for (int i = 0; i < dofs.n2; ++i)
      for (int c = 0; c < 3; ++c) u(i, c) = ev.flow.U[dofs.u(i, c)];
    d["u"] = u;
    d["p"] = VecX(ev.flow.U.segment(dofs.p(0), dofs.n1));
    d["lambda"] = VecX(ev.flow.U.segment(dofs.lam(0), dofs.n1));
  }
  return d;
}

RunConfig config_from(const py::object& cfg) {
  if (py::isinstance<py::str>(cfg)) return parse_config(cfg.cast<std::string>());
  const py::object dumps = py::module_::import("json").attr("dumps");
  return parse_config(dumps(cfg).cast<std::string>(), "<dict>");
}

}  // namespace

PYBIND11_MODULE(_mto, m) {
  m.doc() = "Manifold fluid topology optimization core";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_RuntimeError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  py::class_<BaseManifoldMesh>(m, "Mesh")
      .def_readonly("case_id", &BaseManifoldMesh::case_id)
      .def_readonly("flat", &BaseManifoldMesh::flat)
      .def_readonly("characteristic_length", &BaseManifoldMesh::characteristic_length)
      .def_property_readonly("num_q1", &BaseManifoldMesh::num_q1)
      .def_property_readonly("num_q2", &BaseManifoldMesh::num_q2)
      .def_property_readonly("num_elements", &BaseManifoldMesh::num_elements)
      .def_property_readonly("nodes", &nodes_array)
      .def_property_readonly("segments",
                             [](const BaseManifoldMesh& mesh) {
                               py::list out;
                               for (const auto& s : mesh.segments)
                                 out.append(py::make_tuple(s.name, to_string(s.tag), s.length));
                               return out;
                             })
      .def("area", &BaseManifoldMesh::area);

  m.def(
      "build_case",
      [](const std::string& id, int resolution, double t, std::map<std::string, double> params) {
        CaseSpec cs;
        cs.case_id = id;
        cs.resolution = resolution;
        cs.t = t;
        cs.params = std::move(params);
        return build_case(cs);
      },
      py::arg("case_id"), py::arg("resolution") = 24, py::arg("t") = 0.0,
      py::arg("params") = std::map<std::string, double>{});

  m.def("transformed_normal", [](const Vec3& g, const Vec3& n) { return transformed_normal(g, n); });
  m.def(
      "area_factor",
      [](double d, const Vec3& g, const Vec3& n, const Mat3& shape) { return area_measure_factor(d, g, n, shape).M; },
      py::arg("d_f"), py::arg("grad_df"), py::arg("n_sigma"), py::arg("shape"));
  m.def(
      "line_factor",
      [](double d, const Vec3& g, const Vec3& n, const Mat3& shape, const Vec3& tau) {
        return boundary_measure_factor(d, g, n, shape, tau).L;
      },
      py::arg("d_f"), py::arg("grad_df"), py::arg("n_sigma"), py::arg("shape"), py::arg("tangent"));
  m.def("project", &project, py::arg("gamma_f"), py::arg("beta"), py::arg("xi") = 0.5);
  m.def("projection_derivative", &projection_derivative, py::arg("gamma_f"), py::arg("beta"), py::arg("xi") = 0.5);
  m.def(
      "impermeability",
      [](double gp, double alpha_s, double alpha_f, double q) {
        return impermeability(gp, MaterialParams{alpha_s, alpha_f, q});
      },
      py::arg("gamma_p"), py::arg("alpha_s") = 1e4, py::arg("alpha_f") = 0.0, py::arg("q") = 1.0);

  m.def(
      "normalize_config", [](const py::object& cfg) { return config_to_json(config_from(cfg)); },
      "Validated configuration with every default filled in, as JSON text.");
  m.def("load_config", [](const std::string& path) { return config_to_json(load_config(path)); });

  py::class_<Problem, std::unique_ptr<Problem>>(m, "Problem")
      .def(py::init([](const py::object& cfg) {
             const RunConfig rc = config_from(cfg);
             return std::make_unique<Problem>(build_case(rc.problem.case_spec), rc.problem);
           }),
           py::arg("config") = py::dict())
      .def_property_readonly("mesh", &Problem::mesh, py::return_value_policy::reference_internal)
      .def_property_readonly("num_design", &Problem::num_design)
      .def_property_readonly("num_gamma", &Problem::num_gamma)
      .def("set_beta", &Problem::set_beta)
      .def("initial_design", &Problem::initial_design, py::arg("s0") = 0.3, py::arg("v0") = 0.0)
      .def(
          "evaluate",
          [](const Problem& p, const VecX& x, bool with_flow) {
            Evaluation ev;
            {
              py::gil_scoped_release nogil;
              ev = p.evaluate(x, with_flow);
            }
            return evaluation_dict(p, ev);
          },
          py::arg("x"), py::arg("with_flow") = true)
      .def(
          "gradients",
          [](const Problem& p, const VecX& x) {
            Gradients g;
            {
              py::gil_scoped_release nogil;
              const Evaluation ev = p.evaluate(x);
              g = p.gradients(ev);
            }
            py::dict d;
            d["dJ"] = g.dJ;
            d["ds"] = g.ds;
            d["dv"] = g.dv;
            return d;
          },
          py::arg("x"))
      .def(
          "gradient_check",
          [](const Problem& p, const VecX& x, int directions, double h, unsigned seed) {
            std::vector<GradcheckRow> rows;
            {
              py::gil_scoped_release nogil;
              rows = gradient_check(p, x, directions, h, seed);
            }
            py::list out;
            for (const auto& r : rows) {
              py::dict d;
              d["response"] = r.response;
              d["variable"] = r.variable;
              d["direction"] = r.direction;
              d["analytic"] = r.analytic;
              d["fd"] = r.fd;
              d["rel_err"] = r.rel_err;
              out.append(d);
            }
            return out;
          },
          py::arg("x"), py::arg("directions") = 5, py::arg("h") = 1e-5, py::arg("seed") = 1234u);

  m.def(
      "optimize",
      [](const py::object& cfg, const std::function<void(py::dict)>& callback) {
        const RunConfig rc = config_from(cfg);
        Problem p(build_case(rc.problem.case_spec), rc.problem);
        LoopCallbacks cb;
        if (callback)
          cb.on_iteration = [&](const IterationRecord& r, const Evaluation&, const VecX&) {
            py::gil_scoped_acquire gil;
            callback(record_dict(r));
          };
        LoopResult res;
        {
          py::gil_scoped_release nogil;
          res = run_loop(p, rc.opt, cb);
        }
        py::dict out;
        py::list hist;
        for (const auto& r : res.history) hist.append(record_dict(r));
        out["history"] = hist;
        out["x"] = res.x;
        out["reason"] = to_string(res.reason);
        out["final"] = evaluation_dict(p, res.final_eval);
        return out;
      },
      py::arg("config") = py::dict(), py::arg("callback") = nullptr);
}
