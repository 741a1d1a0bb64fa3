#pragma once

// Jacobi-preconditioned conjugate gradients and incremental Newton-Raphson
// on top of the assembler.

#include <cstdint>
#include <string>
#include <vector>

#include "ncmfe/errors.hpp"
#include "ncmfe/fe_core.hpp"

namespace ncmfe {

struct CgConfig {
  double tolerance = 1e-10;  // relative to |b|
  std::size_t max_iterations = 10000;
  void validate() const;
};

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;  // recursive residual at exit
};

/// Solves K x = b. Throws ValidationError on a non-positive diagonal or a
/// size mismatch. Hitting max_iterations returns the last iterate with
/// converged = false.
CgResult cg_jacobi(const CsrMatrix& k, const std::vector<double>& b, const CgConfig& cfg);

/// Row/column elimination of the constrained DOFs. `prescribed[i]` is the
/// required value of x_i on constrained rows (ignored elsewhere). The
/// constrained columns are moved to the right-hand side, their rows and
/// columns zeroed, and the diagonal kept, so b_i = K_ii prescribed_i there.
void apply_dirichlet(CsrMatrix& k, std::vector<double>& b, const std::vector<char>& constrained,
                     const std::vector<double>& prescribed);

struct NewtonConfig {
  double absolute_tolerance = 1e-8;
  /// Relative to the first free-residual norm of a load step after the
  /// prescribed increment has been applied.
  double relative_tolerance = 1e-10;
  std::size_t max_iterations = 25;
  std::size_t load_steps = 10;
  std::size_t max_halvings = 6;
  void validate() const;
};

struct StepLog {
  double lambda = 0.0;
  bool converged = false;
  /// Free-DOF residual 2-norm at every assembly of this attempt.
  std::vector<double> residual_norms;
  std::vector<std::size_t> cg_iterations;
};

struct NewtonReport {
  bool converged = false;
  double final_lambda = 0.0;
  std::size_t load_steps = 0;  // accepted
  std::size_t halvings = 0;
  std::size_t newton_iterations = 0;
  std::size_t cg_iterations = 0;
  double constitutive_seconds = 0.0;
  double assembly_other_seconds = 0.0;
  double linear_solve_seconds = 0.0;
  double total_seconds = 0.0;
  double max_trace_c = 0.0;
  std::size_t workspace_bytes = 0;
  /// Every attempt including rejected ones, in order.
  std::vector<StepLog> steps;
  std::string failure;
};

struct NewtonResult {
  std::vector<double> u;
  NewtonReport report;
};

/// Ramps every Dirichlet value and traction linearly in lambda over
/// `load_steps` steps. A step that fails (no convergence, NaN, inverted
/// element) is retried from its start with half the increment. Throws
/// ConvergenceError after max_halvings retries of one step unless
/// `throw_on_failure` is false, in which case the partial result comes back
/// with report.converged = false.
NewtonResult newton_solve(const NcmDefinition& model, const FeModel& fe, const NewtonConfig& ncfg,
                          const CgConfig& ccfg, AssemblyMode mode, std::size_t n_batch = 1024,
                          std::size_t n_workers = 1, bool throw_on_failure = true);

/// FNV-1a over the bit patterns of a vector, for comparing solutions across
/// runs and assembly modes.
std::uint64_t digest(const std::vector<double>& v);

}  // namespace ncmfe
