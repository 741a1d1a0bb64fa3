#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

#include "ncmfe/harness.hpp"
#include "ncmfe/model_io.hpp"
#include "ncmfe/synthetic.hpp"

namespace py = pybind11;
using namespace ncmfe;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Mat3 to_mat3(const Array& a) {
  if (a.size() != 9) throw py::value_error("expected a 3x3 array");
  Mat3 m;
  std::copy(a.data(), a.data() + 9, m.v.begin());
  return m;
}

Array mat3_array(const Mat3& m) {
  Array a({3, 3});
  std::copy(m.v.begin(), m.v.end(), a.mutable_data());
  return a;
}

py::dict report_dict(const NewtonReport& r) {
  py::dict d;
  d["converged"] = r.converged;
  d["final_lambda"] = r.final_lambda;
  d["load_steps"] = r.load_steps;
  d["halvings"] = r.halvings;
  d["newton_iterations"] = r.newton_iterations;
  d["cg_iterations"] = r.cg_iterations;
  d["constitutive_seconds"] = r.constitutive_seconds;
  d["assembly_other_seconds"] = r.assembly_other_seconds;
  d["linear_solve_seconds"] = r.linear_solve_seconds;
  d["total_seconds"] = r.total_seconds;
  d["max_trace_c"] = r.max_trace_c;
  d["failure"] = r.failure;
  py::list steps;
  for (const StepLog& s : r.steps) {
    py::dict sd;
    sd["lambda"] = s.lambda;
    sd["converged"] = s.converged;
    sd["residual_norms"] = s.residual_norms;
    sd["cg_iterations"] = s.cg_iterations;
    steps.append(sd);
  }
  d["steps"] = steps;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural constitutive models in nonlinear finite elements";
  m.attr("__version__") = version_string();

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<NcmDefinition>(m, "Model")
      .def_readwrite("name", &NcmDefinition::name)
      .def_property_readonly("architecture", &NcmDefinition::architecture)
      .def_property(
          "mode", [](const NcmDefinition& d) { return to_string(d.mode); },
          [](NcmDefinition& d, const std::string& s) { d.mode = parse_derivative_mode(s); })
      .def_property_readonly("n_inputs", [](const NcmDefinition& d) { return d.kinematics.size(); })
      .def("to_json", [](const NcmDefinition& d, int indent) { return model_to_string(d, indent); },
           py::arg("indent") = 2)
      .def("validate", &NcmDefinition::validate)
      .def("__repr__", [](const NcmDefinition& d) {
        return "<Model " + d.name + " (" + d.architecture() + ", " + to_string(d.mode) + ")>";
      });

  m.def("load_model", &load_model, py::arg("path"));
  m.def("model_from_json", &model_from_string, py::arg("text"));
  m.def("gent_thomas_model", &gent_thomas_model);
  m.def(
      "random_model",
      [](const std::string& arch, std::uint64_t seed, const std::string& variant) {
        std::mt19937_64 rng(seed);
        Architecture a = arch == "micnn" ? Architecture::Micnn
                         : arch == "cann" ? Architecture::Cann
                         : arch == "ickan" ? Architecture::Ickan
                                           : throw ValidationError("unknown architecture '" + arch + "'");
        return random_model(rng, a, variant == "standard" ? KinematicConfig::standard()
                                                          : KinematicConfig::isochoric());
      },
      py::arg("architecture"), py::arg("seed") = 0, py::arg("kinematics") = "isochoric");

  m.def(
      "eval_point",
      [](const NcmDefinition& model, const Array& f) {
        const PointResult r = eval_point(model, to_mat3(f));
        Array tau(6), c({6, 6});
        std::copy(r.tau.v.begin(), r.tau.v.end(), tau.mutable_data());
        std::copy(r.c.v.begin(), r.c.v.end(), c.mutable_data());
        return py::make_tuple(r.psi, tau, c);
      },
      py::arg("model"), py::arg("F"),
      "Returns (psi, tau in Voigt order 11,22,33,12,23,13, c as 6x6).");

  m.def(
      "eval_batch",
      [](const NcmDefinition& model, const Array& fs) {
        if (fs.ndim() != 3 || fs.shape(1) != 3 || fs.shape(2) != 3)
          throw py::value_error("expected an (n, 3, 3) array");
        const std::size_t n = fs.shape(0);
        MaterialBatch batch(std::max<std::size_t>(n, 1), model.kinematics.size());
        batch.set_size(n);
        std::copy(fs.data(), fs.data() + 9 * n, batch.f(0));
        {
          py::gil_scoped_release release;
          eval_batch(model, batch);
        }
        Array psi(n), tau({n, std::size_t{6}}), c({n, std::size_t{6}, std::size_t{6}});
        std::copy(batch.psi_data(), batch.psi_data() + n, psi.mutable_data());
        std::copy(batch.tau_data(), batch.tau_data() + 6 * n, tau.mutable_data());
        std::copy(batch.c_data(), batch.c_data() + 36 * n, c.mutable_data());
        return py::make_tuple(psi, tau, c);
      },
      py::arg("model"), py::arg("F"));

  m.def(
      "loading_path",
      [](const std::string& path, double gamma) { return mat3_array(loading_path(parse_loading_path(path), gamma)); },
      py::arg("path"), py::arg("gamma"));
  m.def(
      "path_scan",
      [](const NcmDefinition& model, double gamma_max, int steps) {
        py::list out;
        for (const PathScanRow& r : run_path_scan(model, gamma_max, steps))
          out.append(py::make_tuple(to_string(r.path), r.gamma, r.psi_model, r.psi_reference, r.status));
        return out;
      },
      py::arg("model"), py::arg("gamma_max") = 0.5, py::arg("steps") = 10,
      "Rows (path, gamma, psi_model, psi_reference, status).");

  py::class_<FeModel>(m, "FeModel")
      .def_property_readonly("n_nodes", [](const FeModel& f) { return f.mesh.n_nodes(); })
      .def_property_readonly("n_elements", [](const FeModel& f) { return f.mesh.n_elements(); })
      .def_property_readonly("n_dofs", [](const FeModel& f) { return f.mesh.n_dofs(); })
      .def_property_readonly("n_constrained", [](const FeModel& f) { return f.dofs.dirichlet.size(); })
      .def_property_readonly("nodes", [](const FeModel& f) {
        Array a({f.mesh.n_nodes(), std::size_t{3}});
        for (std::size_t i = 0; i < f.mesh.n_nodes(); ++i)
          std::copy(f.mesh.nodes[i].begin(), f.mesh.nodes[i].end(), a.mutable_data() + 3 * i);
        return a;
      });

  m.def("make_twist_cube", &make_twist_cube, py::arg("n"));
  m.def(
      "load_problem",
      [](const std::string& mesh, const std::string& boundary) {
        FeModel fe = make_fe_model(load_mesh(mesh));
        std::ifstream in(boundary);
        if (!in) throw ValidationError(boundary + ": cannot open boundary file");
        apply_boundary_file(fe, in);
        return fe;
      },
      py::arg("mesh"), py::arg("boundary"));

  m.def(
      "assemble",
      [](const NcmDefinition& model, const FeModel& fe, const Array& u, const std::string& mode,
         std::size_t n_batch, std::size_t workers, double lambda) {
        if (static_cast<std::size_t>(u.size()) != fe.mesh.n_dofs())
          throw py::value_error("u has wrong length");
        std::vector<double> uv(u.data(), u.data() + u.size()), r;
        CsrMatrix k;
        {
          py::gil_scoped_release release;
          Assembler(model, fe, parse_assembly_mode(mode), n_batch, workers).assemble(uv, lambda, k, r);
        }
        py::array_t<std::int64_t> indptr(k.row_ptr.size()), indices(k.col.size());
        std::copy(k.row_ptr.begin(), k.row_ptr.end(), indptr.mutable_data());
        std::copy(k.col.begin(), k.col.end(), indices.mutable_data());
        return py::make_tuple(Array(k.val.size(), k.val.data()), indices, indptr,
                              Array(r.size(), r.data()));
      },
      py::arg("model"), py::arg("fe"), py::arg("u"), py::arg("mode") = "batch",
      py::arg("n_batch") = 1024, py::arg("workers") = 1, py::arg("load_factor") = 1.0,
      "Returns (data, indices, indptr, r): K in CSR form and the residual.");

  m.def(
      "newton_solve",
      [](const NcmDefinition& model, const FeModel& fe, const std::string& mode, std::size_t n_batch,
         std::size_t workers, std::size_t load_steps, double atol, double rtol) {
        NewtonConfig nc;
        nc.load_steps = load_steps;
        nc.absolute_tolerance = atol;
        nc.relative_tolerance = rtol;
        NewtonResult res;
        {
          py::gil_scoped_release release;
          res = newton_solve(model, fe, nc, {}, parse_assembly_mode(mode), n_batch, workers, false);
        }
        return py::make_tuple(Array(res.u.size(), res.u.data()), report_dict(res.report));
      },
      py::arg("model"), py::arg("fe"), py::arg("mode") = "batch", py::arg("n_batch") = 1024,
      py::arg("workers") = 1, py::arg("load_steps") = 10, py::arg("atol") = 1e-8,
      py::arg("rtol") = 1e-10);

  m.def(
      "verify",
      [](std::uint64_t seed, const std::string& model_path, std::size_t triples) {
        RunConfig cfg;
        cfg.seed = seed;
        cfg.model = model_path;
        VerifyOptions opts;
        opts.triples_per_architecture = triples;
        py::list out;
        for (const VerifyCheck& c : run_verify(cfg, opts)) {
          py::dict d;
          d["name"] = c.name;
          d["passed"] = c.passed;
          d["max_error"] = c.max_error;
          d["tolerance"] = c.tolerance;
          d["detail"] = c.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("seed") = 42, py::arg("model_path") = "", py::arg("triples") = 100);
}
