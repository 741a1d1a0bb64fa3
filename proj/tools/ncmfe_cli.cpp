#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>

#include "ncmfe/harness.hpp"
#include "ncmfe/model_io.hpp"

using namespace ncmfe;

namespace {

// Writes to cfg.out, or stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw ValidationError("out: cannot write '" + path + "'");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-element hyperelasticity with neural constitutive models"};
  app.set_version_flag("--version", version_string());
  app.set_config("--config", "", "TOML/INI file with the same keys as the long options");
  app.require_subcommand(1, 1);
  app.fallthrough();  // global options may follow the subcommand

  RunConfig cfg;
  std::vector<std::string> modes, assembly;
  app.add_option("--model", cfg.model, "Weight file (JSON)");
  app.add_option("--out", cfg.out, "Output file (default stdout)");
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--batch-sizes", cfg.batch_sizes, "Batch sizes")->delimiter(',')->capture_default_str();
  app.add_option("--workers", cfg.workers, "Worker counts for partitioned assembly")
      ->delimiter(',')->capture_default_str();
  app.add_option("--mode", modes, "Derivative mode(s): cgo, fd")->delimiter(',');
  app.add_option("--assembly", assembly, "Assembly algorithm(s): trad, global, batch, partitioned")
      ->delimiter(',');
  app.add_option("--n-points", cfg.n_points, "Material point counts")->delimiter(',')->capture_default_str();
  app.add_option("--repetitions", cfg.repetitions, "Timed repetitions per configuration")->capture_default_str();
  app.add_option("--mesh-sizes", cfg.mesh_sizes, "Twist-cube subdivisions")->delimiter(',')->capture_default_str();
  app.add_option("--load-steps", cfg.newton.load_steps, "Newton load steps")->capture_default_str();
  app.add_option("--newton-atol", cfg.newton.absolute_tolerance, "Absolute residual tolerance")->capture_default_str();
  app.add_option("--newton-rtol", cfg.newton.relative_tolerance, "Relative residual tolerance")->capture_default_str();
  app.add_option("--newton-max-iter", cfg.newton.max_iterations, "Newton iterations per step")->capture_default_str();
  app.add_option("--max-halvings", cfg.newton.max_halvings, "Step-halving retries")->capture_default_str();
  app.add_option("--cg-rtol", cfg.cg.tolerance, "CG relative tolerance")->capture_default_str();
  app.add_option("--cg-max-iter", cfg.cg.max_iterations, "CG iteration limit")->capture_default_str();
  app.add_option("--gamma-max", cfg.gamma_max, "Path-scan amplitude")->capture_default_str();
  app.add_option("--path-steps", cfg.path_steps, "Path-scan samples per path")->capture_default_str();
  app.add_option("--mesh", cfg.mesh, "Mesh file (solve)");
  app.add_option("--bc", cfg.boundary, "Boundary-condition file (solve)");

  auto* matpoint = app.add_subcommand("matpoint-bench", "Constitutive batch-size sweep");
  auto* fe = app.add_subcommand("fe-bench", "Twist-cube Newton benchmarks");
  auto* verify = app.add_subcommand("verify", "Run the verification suite");
  auto* scan = app.add_subcommand("path-scan", "Strain energy along the six loading paths");
  auto* solve = app.add_subcommand("solve", "Solve a mesh with a boundary file");

  CLI11_PARSE(app, argc, argv);

  try {
    for (const std::string& m : modes) cfg.modes.push_back(parse_derivative_mode(m));
    if (!assembly.empty()) {
      cfg.assembly.clear();
      for (const std::string& a : assembly) cfg.assembly.push_back(parse_assembly_mode(a));
    }
    cfg.validate();

    if (matpoint->parsed()) {
      const auto rows = run_matpoint_bench(cfg);
      Output out(cfg.out);
      write_bench_csv(out.stream(), rows, cfg);
    } else if (fe->parsed()) {
      const auto rows = run_fe_bench(cfg);
      Output out(cfg.out);
      write_bench_csv(out.stream(), rows, cfg);
      for (const auto& r : rows)
        if (!r.converged) std::cerr << "warning: n_dofs=" << r.n_dofs << " " << r.assembly
                                    << " did not converge: " << r.note << "\n";
    } else if (verify->parsed()) {
      const auto checks = run_verify(cfg);
      Output out(cfg.out);
      write_verify_report(out.stream(), checks);
      for (const auto& c : checks)
        if (!c.passed) return 1;
    } else if (scan->parsed()) {
      const NcmDefinition model = model_or_reference(cfg);
      const auto rows = run_path_scan(model, cfg.gamma_max, cfg.path_steps);
      Output out(cfg.out);
      write_path_scan_csv(out.stream(), rows, model.name);
    } else if (solve->parsed()) {
      const SolveOutput s = run_solve(cfg);
      const NewtonReport& r = s.result.report;
      std::cerr << "converged=" << r.converged << " lambda=" << r.final_lambda
                << " load_steps=" << r.load_steps << " halvings=" << r.halvings
                << " newton_iterations=" << r.newton_iterations
                << " cg_iterations=" << r.cg_iterations << " max_trace_c=" << r.max_trace_c
                << " total_s=" << r.total_seconds << "\n";
      if (!r.converged) std::cerr << "error: " << r.failure << "\n";
      Output out(cfg.out);
      write_displacements_csv(out.stream(), s);
      return r.converged ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
