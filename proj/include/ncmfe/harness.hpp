#pragma once

// Benchmark sweeps, the verification suite and path scans behind the
// command-line tool. Everything here returns plain records; the writers
// turn them into CSV.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ncmfe/constitutive.hpp"
#include "ncmfe/fe_core.hpp"
#include "ncmfe/solver.hpp"

namespace ncmfe {

std::string version_string();

struct RunConfig {
  std::string model;  // weight file; empty selects the command default
  std::string out;    // empty or "-" writes to stdout
  std::uint64_t seed = 42;
  std::vector<std::size_t> batch_sizes{1, 32, 1024};
  std::vector<std::size_t> n_points{1024};
  std::size_t repetitions = 5;
  std::vector<std::size_t> workers{1};
  /// Empty: both modes for matpoint-bench, CGO elsewhere.
  std::vector<DerivativeMode> modes;
  std::vector<AssemblyMode> assembly{AssemblyMode::Batch};
  std::vector<int> mesh_sizes{4};
  NewtonConfig newton;
  CgConfig cg;
  double gamma_max = 0.5;
  int path_steps = 10;
  std::string mesh;      // solve: mesh file (empty = unit cube)
  std::string boundary;  // solve: boundary file

  /// Throws ValidationError naming the offending key.
  void validate() const;
  /// key=value pairs separated by ';', stable order.
  std::string echo() const;
};

/// Model named by cfg.model, or the analytic Gent-Thomas model.
NcmDefinition model_or_reference(const RunConfig& cfg);

// --- Benchmarks --------------------------------------------------------------

struct BenchRecord {
  std::string experiment;  // "matpoint" or "fe"
  std::string architecture;
  std::string mode;
  std::string assembly;
  std::size_t n_points = 0;
  std::size_t n_dofs = 0;
  std::size_t batch_size = 0;
  std::size_t workers = 1;
  std::size_t repetition = 0;
  double constitutive_ns = 0.0;
  double assembly_ns = 0.0;
  double linear_ns = 0.0;
  double total_ns = 0.0;
  std::size_t peak_bytes = 0;
  std::size_t newton_iterations = 0;
  std::size_t cg_iterations = 0;
  double max_trace_c = 0.0;
  bool converged = true;
  std::string digest;
  std::string note;
  double speedup = 0.0;
};

/// Constitutive sweeps over (model, n_points, batch size, mode). Without a
/// model file one seeded synthetic model per architecture is used.
std::vector<BenchRecord> run_matpoint_bench(const RunConfig& cfg);

/// Twist-cube Newton solves over (mesh size, assembly, batch size, workers).
std::vector<BenchRecord> run_fe_bench(const RunConfig& cfg);

/// Fills the speedup column from group medians (see docs/benchmarks.md).
void compute_speedups(std::vector<BenchRecord>& rows);

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& rows, const RunConfig& cfg);

// --- Verification --------------------------------------------------------------

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Evaluators the suite calls; tests swap them to check that the suite
/// notices broken implementations.
struct VerifyHooks {
  std::function<void(const NcmDefinition&, MaterialBatch&)> analytic = eval_batch;
};

struct VerifyOptions {
  std::size_t triples_per_architecture = 100;
  int assembly_mesh = 4;
  int tangent_mesh = 3;
};

/// Runs every property. With a model file, its own checks (validation,
/// CGO vs FD, objectivity, reference fit) are added.
std::vector<VerifyCheck> run_verify(const RunConfig& cfg, const VerifyOptions& opts = {},
                                    const VerifyHooks& hooks = {});

// Individual suites, also used by the acceptance binary.
VerifyCheck check_gent_thomas_identity();
VerifyCheck check_gent_thomas_dilation();
std::vector<VerifyCheck> check_cgo_vs_fd(std::uint64_t seed, std::size_t triples,
                                         const VerifyHooks& hooks = {});
std::vector<VerifyCheck> check_cgo_vs_fd_model(const NcmDefinition& model, std::uint64_t seed,
                                               std::size_t points, const VerifyHooks& hooks = {});
std::vector<VerifyCheck> check_convexity(std::uint64_t seed, std::size_t samples);
VerifyCheck check_cann_diagonal(std::uint64_t seed, std::size_t samples);
std::vector<VerifyCheck> check_objectivity(const std::vector<NcmDefinition>& models,
                                           std::uint64_t seed, std::size_t samples);
VerifyCheck check_partition_of_unity();
VerifyCheck check_assembly_equality(const NcmDefinition& model, int n, std::uint64_t seed);
VerifyCheck check_tangent(const NcmDefinition& model, int n, std::uint64_t seed);
VerifyCheck check_newton_order(const NcmDefinition& model, int n);
VerifyCheck check_loader_field_path();
VerifyCheck check_reference_fit(const NcmDefinition& model);

/// CSV: check,passed,max_error,tolerance,detail.
void write_verify_report(std::ostream& out, const std::vector<VerifyCheck>& checks);

// --- Path scan -------------------------------------------------------------------

struct PathScanRow {
  LoadingPath path = LoadingPath::UT;
  double gamma = 0.0;
  double psi_model = 0.0;
  double psi_reference = 0.0;
  std::string status;  // "ok" or the domain error
};

/// Psi along all six paths for the model and Gent-Thomas. Domain failures
/// are flagged per row.
std::vector<PathScanRow> run_path_scan(const NcmDefinition& model, double gamma_max, int steps);
void write_path_scan_csv(std::ostream& out, const std::vector<PathScanRow>& rows,
                         const std::string& model_name);

// --- Solve -------------------------------------------------------------------------

struct SolveOutput {
  FeModel fe;
  NewtonResult result;
};

/// Mesh and boundary files from cfg, assembly mode cfg.assembly[0]. Without a
/// mesh the unit cube of size mesh_sizes[0] is used, with the twist conditions
/// unless a boundary file is given.
SolveOutput run_solve(const RunConfig& cfg);
/// CSV: node,x,y,z,ux,uy,uz.
void write_displacements_csv(std::ostream& out, const SolveOutput& s);

}  // namespace ncmfe
