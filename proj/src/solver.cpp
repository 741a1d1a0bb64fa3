#include "ncmfe/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

namespace ncmfe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

void CgConfig::validate() const {
  if (!(tolerance > 0.0 && tolerance < 1.0)) throw ValidationError("cg.tolerance: must lie in (0, 1)");
  if (max_iterations < 1) throw ValidationError("cg.max_iterations: must be at least 1");
}

void NewtonConfig::validate() const {
  if (!(absolute_tolerance > 0.0)) throw ValidationError("newton.absolute_tolerance: must be positive");
  if (!(relative_tolerance > 0.0)) throw ValidationError("newton.relative_tolerance: must be positive");
  if (max_iterations < 1) throw ValidationError("newton.max_iterations: must be at least 1");
  if (load_steps < 1) throw ValidationError("newton.load_steps: must be at least 1");
}

CgResult cg_jacobi(const CsrMatrix& k, const std::vector<double>& b, const CgConfig& cfg) {
  cfg.validate();
  const std::size_t n = k.n;
  if (b.size() != n) throw ValidationError("cg: right-hand side has wrong length");
  std::vector<double> inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = k.diagonal(i);
    if (!(d > 0.0))
      throw ValidationError("cg: non-positive diagonal " + std::to_string(d) + " at row " +
                            std::to_string(i));
    inv_diag[i] = 1.0 / d;
  }
  CgResult res;
  res.x.assign(n, 0.0);
  std::vector<double> r = b, z(n), p(n), ap(n);
  const double bnorm = std::sqrt(dot(b, b));
  res.residual_norm = bnorm;
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  while (res.iterations < cfg.max_iterations) {
    k.multiply(p.data(), ap.data());
    const double alpha = rz / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++res.iterations;
    res.residual_norm = std::sqrt(dot(r, r));
    if (res.residual_norm <= cfg.tolerance * bnorm) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

void apply_dirichlet(CsrMatrix& k, std::vector<double>& b, const std::vector<char>& constrained,
                     const std::vector<double>& prescribed) {
  if (constrained.size() != k.n || b.size() != k.n || prescribed.size() != k.n)
    throw ValidationError("apply_dirichlet: size mismatch");
  for (std::size_t i = 0; i < k.n; ++i) {
    for (std::size_t p = k.row_ptr[i]; p < k.row_ptr[i + 1]; ++p) {
      const std::size_t j = k.col[p];
      if (constrained[i]) {
        if (j != i) k.val[p] = 0.0;
      } else if (constrained[j]) {
        b[i] -= k.val[p] * prescribed[j];
        k.val[p] = 0.0;
      }
    }
  }
  for (std::size_t i = 0; i < k.n; ++i)
    if (constrained[i]) b[i] = k.diagonal(i) * prescribed[i];
}

std::uint64_t digest(const std::vector<double>& v) {
  std::uint64_t h = 1469598103934665603ull;
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

namespace {

class NewtonDriver {
 public:
  NewtonDriver(const NcmDefinition& model, const FeModel& fe, const NewtonConfig& ncfg,
               const CgConfig& ccfg, AssemblyMode mode, std::size_t n_batch,
               std::size_t n_workers)
      : fe_(fe), ncfg_(ncfg), ccfg_(ccfg), asm_(model, fe, mode, n_batch, n_workers) {}

  Assembler& assembler() { return asm_; }

  // One load step from the current u to lambda. Leaves u at the last
  // iterate; the caller restores it on failure.
  bool attempt(std::vector<double>& u, double lambda, NewtonReport& rep) {
    StepLog log;
    log.lambda = lambda;
    const std::size_t n = fe_.mesh.n_dofs();
    std::vector<double> increment(n, 0.0);
    bool pending = false;
    for (const DirichletDof& d : fe_.dofs.dirichlet) {
      increment[d.dof] = d.value(lambda) - u[d.dof];
      pending = pending || increment[d.dof] != 0.0;
    }
    double reference = -1.0;
    bool ok = false;
    try {
      for (std::size_t it = 0; it < ncfg_.max_iterations; ++it) {
        AssemblyStats st;
        asm_.assemble(u, lambda, k_, r_, &st);
        ++rep.newton_iterations;
        rep.constitutive_seconds += st.constitutive_seconds;
        rep.assembly_other_seconds += st.total_seconds - st.constitutive_seconds;
        double norm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          if (!fe_.dofs.constrained[i]) norm2 += r_[i] * r_[i];
        const double norm = std::sqrt(norm2);
        log.residual_norms.push_back(norm);
        if (!std::isfinite(norm)) {
          rep.failure = "non-finite residual at lambda " + std::to_string(lambda);
          break;
        }
        if (!pending) {
          if (reference < 0.0) reference = norm;
          if (norm <= ncfg_.absolute_tolerance || norm <= ncfg_.relative_tolerance * reference) {
            rep.max_trace_c = st.max_trace_c;
            ok = true;
            break;
          }
        }
        for (std::size_t i = 0; i < n; ++i) b_[i] = -r_[i];
        if (!pending) std::fill(increment.begin(), increment.end(), 0.0);
        b_.resize(n);
        apply_dirichlet(k_, b_, fe_.dofs.constrained, increment);
        const auto t0 = Clock::now();
        const CgResult cg = cg_jacobi(k_, b_, ccfg_);
        rep.linear_solve_seconds += seconds_since(t0);
        rep.cg_iterations += cg.iterations;
        log.cg_iterations.push_back(cg.iterations);
        for (std::size_t i = 0; i < n; ++i) u[i] += cg.x[i];
        pending = false;
      }
      if (!ok && rep.failure.empty())
        rep.failure = "no convergence in " + std::to_string(ncfg_.max_iterations) +
                      " iterations at lambda " + std::to_string(lambda);
    } catch (const DomainError& e) {
      rep.failure = e.what();
    } catch (const ValidationError& e) {
      // Loss of positive definiteness shows up as a bad CG diagonal.
      rep.failure = e.what();
    }
    log.converged = ok;
    rep.steps.push_back(std::move(log));
    return ok;
  }

  void reserve(std::size_t n) { b_.assign(n, 0.0); }

 private:
  const FeModel& fe_;
  NewtonConfig ncfg_;
  CgConfig ccfg_;
  Assembler asm_;
  CsrMatrix k_;
  std::vector<double> r_, b_;
};

}  // namespace

NewtonResult newton_solve(const NcmDefinition& model, const FeModel& fe, const NewtonConfig& ncfg,
                          const CgConfig& ccfg, AssemblyMode mode, std::size_t n_batch,
                          std::size_t n_workers, bool throw_on_failure) {
  ncfg.validate();
  ccfg.validate();
  const auto t0 = Clock::now();
  NewtonDriver driver(model, fe, ncfg, ccfg, mode, n_batch, n_workers);
  NewtonResult res;
  NewtonReport& rep = res.report;
  rep.workspace_bytes = driver.assembler().workspace_bytes();
  res.u.assign(fe.mesh.n_dofs(), 0.0);
  driver.reserve(fe.mesh.n_dofs());

  const double nominal = 1.0 / static_cast<double>(ncfg.load_steps);
  double lambda = 0.0;
  for (std::size_t k = 1; k <= ncfg.load_steps; ++k) {
    const double goal = k == ncfg.load_steps ? 1.0 : nominal * static_cast<double>(k);
    double step = goal - lambda;
    std::size_t halvings = 0;
    while (lambda < goal) {
      const double target = goal - (lambda + step) < 1e-12 ? goal : lambda + step;
      const std::vector<double> start = res.u;
      rep.failure.clear();
      if (driver.attempt(res.u, target, rep)) {
        lambda = target;
        rep.final_lambda = lambda;
        ++rep.load_steps;
        continue;
      }
      res.u = start;
      if (halvings >= ncfg.max_halvings) {
        rep.total_seconds = seconds_since(t0);
        rep.failure = "load step failed at lambda " + std::to_string(target) + " after " +
                      std::to_string(halvings) + " halvings: " + rep.failure;
        if (throw_on_failure) throw ConvergenceError(rep.failure);
        return res;
      }
      ++halvings;
      ++rep.halvings;
      step *= 0.5;
    }
  }
  rep.failure.clear();
  rep.converged = true;
  rep.total_seconds = seconds_since(t0);
  return res;
}

}  // namespace ncmfe
