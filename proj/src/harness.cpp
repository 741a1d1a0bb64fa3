#include "ncmfe/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "ncmfe/memory.hpp"
#include "ncmfe/model_io.hpp"
#include "ncmfe/synthetic.hpp"

#ifndef NCMFE_VERSION
#define NCMFE_VERSION "unknown"
#endif

namespace ncmfe {

namespace {

using Clock = std::chrono::steady_clock;

double ns_since(Clock::time_point t0) {
  // Clamped so a row never reports a zero wall time.
  return std::max(1.0, std::chrono::duration<double, std::nano>(Clock::now() - t0).count());
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

std::string num(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

std::string short_num(double x) {
  std::ostringstream ss;
  ss << std::setprecision(6) << x;
  return ss.str();
}

std::string hex64(std::uint64_t h) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

// RFC 4180 quoting when needed.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

double max_abs(const double* a, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

double rel_diff(const double* a, const double* ref, std::size_t n) {
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(a[i] - ref[i]));
  return d / std::max(max_abs(ref, n), 1e-300);
}

std::vector<DerivativeMode> modes_or(const RunConfig& cfg, std::vector<DerivativeMode> fallback) {
  return cfg.modes.empty() ? fallback : cfg.modes;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> random_inputs(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> d(0.5, 4.0);
  std::vector<double> k(m);
  for (double& x : k) x = d(rng);
  return k;
}

VerifyCheck make_check(std::string name, double err, double tol, std::string detail = {}) {
  return {std::move(name), err <= tol, err, tol, std::move(detail)};
}

}  // namespace

std::string version_string() { return NCMFE_VERSION; }

void RunConfig::validate() const {
  auto positive = [](const auto& list, const char* key) {
    if (list.empty()) throw ValidationError(std::string(key) + ": empty list");
    for (const auto& x : list)
      if (x < 1) throw ValidationError(std::string(key) + ": values must be at least 1");
  };
  positive(batch_sizes, "batch_sizes");
  positive(n_points, "n_points");
  positive(workers, "workers");
  positive(mesh_sizes, "mesh_sizes");
  if (repetitions < 1) throw ValidationError("repetitions: must be at least 1");
  if (assembly.empty()) throw ValidationError("assembly: empty list");
  if (!(gamma_max >= 0.0)) throw ValidationError("gamma_max: must be non-negative");
  if (path_steps < 1) throw ValidationError("path_steps: must be at least 1");
  newton.validate();
  cg.validate();
}

std::string RunConfig::echo() const {
  auto sz = [](std::size_t x) { return std::to_string(x); };
  std::ostringstream s;
  s << "model=" << (model.empty() ? "default" : model) << ";seed=" << seed
    << ";batch_sizes=" << join(batch_sizes, sz) << ";n_points=" << join(n_points, sz)
    << ";repetitions=" << repetitions << ";workers=" << join(workers, sz)
    << ";mode=" << (modes.empty() ? "default" : join(modes, [](DerivativeMode m) { return to_string(m); }))
    << ";assembly=" << join(assembly, [](AssemblyMode m) { return to_string(m); })
    << ";mesh_sizes=" << join(mesh_sizes, [](int n) { return std::to_string(n); })
    << ";load_steps=" << newton.load_steps << ";newton_atol=" << newton.absolute_tolerance
    << ";newton_rtol=" << newton.relative_tolerance << ";newton_max_iter=" << newton.max_iterations
    << ";max_halvings=" << newton.max_halvings << ";cg_rtol=" << cg.tolerance
    << ";cg_max_iter=" << cg.max_iterations << ";gamma_max=" << gamma_max
    << ";path_steps=" << path_steps;
  if (!mesh.empty()) s << ";mesh=" << mesh;
  if (!boundary.empty()) s << ";boundary=" << boundary;
  return s.str();
}

NcmDefinition model_or_reference(const RunConfig& cfg) {
  return cfg.model.empty() ? gent_thomas_model() : load_model(cfg.model);
}

// --- Benchmarks ------------------------------------------------------------------

std::vector<BenchRecord> run_matpoint_bench(const RunConfig& cfg) {
  cfg.validate();
  std::vector<NcmDefinition> models;
  if (cfg.model.empty()) {
    std::mt19937_64 rng(cfg.seed);
    for (Architecture a : kAllArchitectures) models.push_back(random_model(rng, a));
  } else {
    models.push_back(load_model(cfg.model));
  }
  std::vector<BenchRecord> rows;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    for (std::size_t np : cfg.n_points) {
      // Same deformation set for every batch size and mode.
      std::mt19937_64 rng(cfg.seed + 7919 * (mi + 1));
      std::vector<Mat3> fs(np);
      for (Mat3& f : fs) f = random_deformation(rng);
      for (DerivativeMode mode : modes_or(cfg, {DerivativeMode::CGO, DerivativeMode::FD})) {
        NcmDefinition model = models[mi];
        model.mode = mode;
        for (std::size_t requested : cfg.batch_sizes) {
          const std::size_t bs = std::min(requested, np);
          memory_reset_peak();
          const std::size_t base = memory_current_bytes();
          MaterialBatch batch(bs, model.kinematics.size());
          auto sweep = [&] {
            for (std::size_t start = 0; start < np; start += bs) {
              const std::size_t count = std::min(bs, np - start);
              batch.set_size(count);
              for (std::size_t p = 0; p < count; ++p) batch.set_f(p, fs[start + p]);
              eval_batch(model, batch);
            }
          };
          sweep();  // warm-up, discarded
          for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
            const auto t0 = Clock::now();
            sweep();
            BenchRecord r;
            r.experiment = "matpoint";
            r.architecture = model.architecture();
            r.mode = to_string(mode);
            r.n_points = np;
            r.batch_size = bs;
            r.repetition = rep;
            r.total_ns = r.constitutive_ns = ns_since(t0);
            r.peak_bytes = memory_peak_bytes() - std::min(base, memory_peak_bytes());
            if (bs != requested) r.note = "batch clamped to n_points";
            rows.push_back(std::move(r));
          }
        }
      }
    }
  }
  compute_speedups(rows);
  return rows;
}

std::vector<BenchRecord> run_fe_bench(const RunConfig& cfg) {
  cfg.validate();
  const NcmDefinition base_model = model_or_reference(cfg);
  struct Setup {
    AssemblyMode mode;
    std::size_t batch, workers;
  };
  std::vector<BenchRecord> rows;
  for (DerivativeMode dmode : modes_or(cfg, {DerivativeMode::CGO})) {
    NcmDefinition model = base_model;
    model.mode = dmode;
    for (int n : cfg.mesh_sizes) {
      const FeModel fe = make_twist_cube(n);
      const std::size_t total_qp = fe.mesh.n_elements() * kQuadPoints;
      std::vector<Setup> setups;
      for (AssemblyMode a : cfg.assembly) {
        switch (a) {
          case AssemblyMode::Traditional: setups.push_back({a, 1, 1}); break;
          case AssemblyMode::Global: setups.push_back({a, total_qp, 1}); break;
          case AssemblyMode::Batch:
            for (std::size_t b : cfg.batch_sizes) setups.push_back({a, b, 1});
            break;
          case AssemblyMode::Partitioned:
            for (std::size_t b : cfg.batch_sizes)
              for (std::size_t w : cfg.workers) setups.push_back({a, b, w});
            break;
        }
      }
      for (const Setup& s : setups) {
        auto solve = [&](BenchRecord& r) {
          try {
            const NewtonResult res = newton_solve(model, fe, cfg.newton, cfg.cg, s.mode, s.batch,
                                                  s.workers, false);
            const NewtonReport& rep = res.report;
            r.constitutive_ns = std::max(1.0, rep.constitutive_seconds * 1e9);
            r.assembly_ns = std::max(1.0, rep.assembly_other_seconds * 1e9);
            r.linear_ns = std::max(1.0, rep.linear_solve_seconds * 1e9);
            r.newton_iterations = rep.newton_iterations;
            r.cg_iterations = rep.cg_iterations;
            r.max_trace_c = rep.max_trace_c;
            r.converged = rep.converged;
            r.digest = hex64(digest(res.u));
            r.note = rep.failure;
            r.workers = std::min(s.workers, fe.mesh.n_elements());
          } catch (const std::exception& e) {
            r.converged = false;
            r.note = e.what();
          }
        };
        BenchRecord warm;
        solve(warm);
        for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
          BenchRecord r;
          r.experiment = "fe";
          r.architecture = model.architecture();
          r.mode = to_string(dmode);
          r.assembly = to_string(s.mode);
          r.n_points = total_qp;
          r.n_dofs = fe.mesh.n_dofs();
          r.batch_size = std::min(s.batch, total_qp);
          r.workers = s.workers;
          r.repetition = rep;
          memory_reset_peak();
          const std::size_t base = memory_current_bytes();
          const auto t0 = Clock::now();
          solve(r);
          r.total_ns = ns_since(t0);
          r.peak_bytes = memory_peak_bytes() - std::min(base, memory_peak_bytes());
          rows.push_back(std::move(r));
        }
      }
    }
  }
  compute_speedups(rows);
  return rows;
}

void compute_speedups(std::vector<BenchRecord>& rows) {
  // Groups: (experiment, architecture, mode, size). Within a group, one
  // configuration per (assembly, batch, workers); speedup is the baseline
  // configuration's median over this configuration's median.
  using GroupKey = std::tuple<std::string, std::string, std::string, std::size_t, std::size_t>;
  using ConfigKey = std::tuple<std::string, std::size_t, std::size_t>;
  std::map<GroupKey, std::map<ConfigKey, std::vector<double>>> times;
  std::map<GroupKey, ConfigKey> first;
  auto metric = [](const BenchRecord& r) {
    return r.experiment == "fe" ? r.constitutive_ns + r.assembly_ns : r.total_ns;
  };
  auto gkey = [](const BenchRecord& r) {
    return GroupKey{r.experiment, r.architecture, r.mode, r.n_points, r.n_dofs};
  };
  auto ckey = [](const BenchRecord& r) { return ConfigKey{r.assembly, r.batch_size, r.workers}; };
  for (const BenchRecord& r : rows) {
    times[gkey(r)][ckey(r)].push_back(metric(r));
    first.try_emplace(gkey(r), ckey(r));
  }
  std::map<GroupKey, double> baseline;
  for (auto& [g, configs] : times) {
    const ConfigKey* base = &first[g];
    for (const auto& [c, v] : configs) {
      const auto& [assembly, batch, workers] = c;
      const bool is_base = std::get<0>(g) == "fe" ? assembly == "trad" && workers == 1 : batch == 1;
      if (is_base) {
        base = &c;
        break;
      }
    }
    if (std::get<0>(g) == "matpoint" && std::get<1>(*base) != 1) {
      // No batch-1 rows: the smallest batch is the baseline.
      base = &configs.begin()->first;
      for (const auto& [c, v] : configs)
        if (std::get<1>(c) < std::get<1>(*base)) base = &c;
    }
    baseline[g] = median(configs.at(*base));
  }
  for (BenchRecord& r : rows) r.speedup = baseline[gkey(r)] / median(times[gkey(r)][ckey(r)]);
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& rows, const RunConfig& cfg) {
  const std::string version = version_string(), echo = cfg.echo();
  out << "# ncmfe benchmark schema 1\n# version: " << version << "\n# config: " << echo << "\n";
  out << "experiment,version,architecture,mode,assembly,n_points,n_dofs,batch_size,workers,"
         "repetition,constitutive_ns,assembly_ns,linear_ns,total_ns,peak_bytes,newton_iterations,"
         "cg_iterations,max_trace_c,converged,digest,speedup,note,config\n";
  for (const BenchRecord& r : rows) {
    out << r.experiment << "," << csv_field(version) << "," << r.architecture << "," << r.mode << ","
        << r.assembly << "," << r.n_points << "," << r.n_dofs << "," << r.batch_size << ","
        << r.workers << "," << r.repetition << "," << std::llround(r.constitutive_ns) << ","
        << std::llround(r.assembly_ns) << "," << std::llround(r.linear_ns) << ","
        << std::llround(r.total_ns) << "," << r.peak_bytes << "," << r.newton_iterations << ","
        << r.cg_iterations << "," << num(r.max_trace_c) << "," << (r.converged ? 1 : 0) << ","
        << r.digest << "," << num(r.speedup) << "," << csv_field(r.note) << ","
        << csv_field(echo) << "\n";
  }
}

// --- Verification -----------------------------------------------------------------

VerifyCheck check_gent_thomas_identity() {
  const PointResult r = eval_gent_thomas(Mat3::identity());
  const double err = std::max(std::abs(r.psi), max_abs(r.tau.v.data(), 6));
  return make_check("gent_thomas_identity", err, 1e-12, "max(|psi(I)|, |tau(I)|)");
}

VerifyCheck check_gent_thomas_dilation() {
  const Mat3 f{{2, 0, 0, 0, 2, 0, 0, 0, 2}};
  const double psi = eval_gent_thomas(f).psi;
  return make_check("gent_thomas_dilation", std::abs(psi - 49.0), 1e-10,
                    "psi(diag(2,2,2)) = " + num(psi));
}

namespace {

// Analytic (through the hook) and FD results for one model at F.
std::pair<double, double> cgo_fd_errors(const NcmDefinition& model, const Mat3& f,
                                        MaterialBatch& a, MaterialBatch& b,
                                        const VerifyHooks& hooks) {
  NcmDefinition cgo = model, fd = model;
  cgo.mode = DerivativeMode::CGO;
  fd.mode = DerivativeMode::FD;
  a.set_size(1);
  b.set_size(1);
  a.set_f(0, f);
  b.set_f(0, f);
  hooks.analytic(cgo, a);
  eval_batch(fd, b);
  return {rel_diff(a.tau(0), b.tau(0), 6), rel_diff(a.c(0), b.c(0), 36)};
}

}  // namespace

std::vector<VerifyCheck> check_cgo_vs_fd(std::uint64_t seed, std::size_t triples,
                                         const VerifyHooks& hooks) {
  std::vector<VerifyCheck> out;
  MaterialBatch a(1), b(1);
  for (Architecture arch : kAllArchitectures) {
    std::mt19937_64 rng(seed + 101 * static_cast<std::uint64_t>(arch));
    double et = 0.0, ec = 0.0;
    std::size_t failures = 0;
    for (std::size_t t = 0; t < triples; ++t) {
      const NcmDefinition model = random_model(
          rng, arch, t % 2 ? KinematicConfig::standard() : KinematicConfig::isochoric());
      const Mat3 f = random_deformation(rng);
      try {
        const auto [tau, c] = cgo_fd_errors(model, f, a, b, hooks);
        et = std::max(et, tau);
        ec = std::max(ec, c);
      } catch (const DomainError&) {
        ++failures;
      }
    }
    const std::string detail = std::to_string(triples) + " triples, " +
                               std::to_string(failures) + " outside the model domain";
    if (failures == triples) et = ec = INFINITY;
    out.push_back(make_check(std::string("cgo_vs_fd_tau.") + to_string(arch), et, 1e-5, detail));
    out.push_back(make_check(std::string("cgo_vs_fd_stiffness.") + to_string(arch), ec, 1e-3, detail));
  }
  return out;
}

std::vector<VerifyCheck> check_cgo_vs_fd_model(const NcmDefinition& model, std::uint64_t seed,
                                               std::size_t points, const VerifyHooks& hooks) {
  std::mt19937_64 rng(seed);
  MaterialBatch a(1, model.kinematics.size()), b(1, model.kinematics.size());
  double et = 0.0, ec = 0.0;
  for (std::size_t t = 0; t < points; ++t) {
    const auto [tau, c] = cgo_fd_errors(model, random_deformation(rng), a, b, hooks);
    et = std::max(et, tau);
    ec = std::max(ec, c);
  }
  const std::string d = model.name + ", " + std::to_string(points) + " points";
  return {make_check("model_cgo_vs_fd_tau", et, 1e-5, d),
          make_check("model_cgo_vs_fd_stiffness", ec, 1e-3, d)};
}

std::vector<VerifyCheck> check_convexity(std::uint64_t seed, std::size_t samples) {
  std::vector<VerifyCheck> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Architecture arch : {Architecture::Micnn, Architecture::Ickan}) {
    double convex = 0.0, mono = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const InnerNetwork net = arch == Architecture::Micnn ? InnerNetwork{random_micnn(rng, 3)}
                                                           : InnerNetwork{random_ickan(rng, 3)};
      const std::vector<double> k1 = random_inputs(rng, 3), k2 = random_inputs(rng, 3);
      const double lam = u(rng);
      std::vector<double> mid(3), up(3);
      for (int i = 0; i < 3; ++i) {
        mid[i] = lam * k1[i] + (1 - lam) * k2[i];
        up[i] = k1[i] + u(rng);
      }
      const double chord = lam * inner_value(net, k1) + (1 - lam) * inner_value(net, k2);
      convex = std::max(convex, inner_value(net, mid) - chord);
      mono = std::max(mono, inner_value(net, k1) - inner_value(net, up));
      for (double g : inner_eval(net, k1).gradient) mono = std::max(mono, -g);
    }
    const std::string d = std::to_string(samples) + " samples, violation measured";
    out.push_back(make_check(std::string("convexity.") + to_string(arch), std::max(convex, 0.0), 1e-9, d));
    out.push_back(make_check(std::string("monotonicity.") + to_string(arch), std::max(mono, 0.0), 1e-9, d));
  }
  return out;
}

VerifyCheck check_cann_diagonal(std::uint64_t seed, std::size_t samples) {
  std::mt19937_64 rng(seed);
  double off = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const CannWeights w = random_cann(rng, 3);
    const InnerEval e = cann_eval(w, random_inputs(rng, 3));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) off = std::max(off, std::abs(e.hessian[i * 3 + j]));
  }
  return make_check("cann_hessian_diagonal", off, 0.0, "max |off-diagonal|");
}

std::vector<VerifyCheck> check_objectivity(const std::vector<NcmDefinition>& models,
                                           std::uint64_t seed, std::size_t samples) {
  std::mt19937_64 rng(seed);
  double epsi = 0.0, etau = 0.0;
  for (const NcmDefinition& m : models)
    for (std::size_t s = 0; s < samples; ++s) {
      const Mat3 f = random_deformation(rng), q = random_rotation(rng);
      const PointResult a = eval_point(m, f), b = eval_point(m, q * f);
      epsi = std::max(epsi, std::abs(a.psi - b.psi) / std::max(1.0, std::abs(a.psi)));
      const SymTensor3 rotated = to_voigt(q * from_voigt(a.tau) * transpose(q));
      etau = std::max(etau, rel_diff(b.tau.v.data(), rotated.v.data(), 6));
    }
  const std::string d = std::to_string(models.size()) + " models x " + std::to_string(samples) + " rotations";
  return {make_check("objectivity_psi", epsi, 1e-10, d), make_check("objectivity_tau", etau, 1e-10, d)};
}

VerifyCheck check_partition_of_unity() {
  IckanWeights w;
  w.make_uniform_knots();
  double err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = w.x_min + (w.x_max - w.x_min) * i / 999.0;
    const SplineBasis b = bspline_basis(w, x);
    double s = 0.0;
    for (double v : b.value) s += v;
    err = std::max(err, std::abs(s - 1.0));
  }
  return make_check("bspline_partition_of_unity", err, 1e-12, "1000-point scan, order 3");
}

VerifyCheck check_assembly_equality(const NcmDefinition& model, int n, std::uint64_t seed) {
  const FeModel fe = make_twist_cube(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  std::vector<double> u(fe.mesh.n_dofs());
  for (double& x : u) x = d(rng);
  CsrMatrix k_ref;
  std::vector<double> r_ref;
  assemble_traditional(model, fe, u, k_ref, r_ref);
  const std::size_t total = fe.mesh.n_elements() * kQuadPoints;
  struct Setup {
    AssemblyMode mode;
    std::size_t batch, workers;
  };
  const std::vector<Setup> setups{{AssemblyMode::Global, 1, 1},       {AssemblyMode::Batch, 1, 1},
                                  {AssemblyMode::Batch, 497, 1},      {AssemblyMode::Batch, total, 1},
                                  {AssemblyMode::Partitioned, 1024, 1}, {AssemblyMode::Partitioned, 1024, 2},
                                  {AssemblyMode::Partitioned, 1024, 4}};
  double err = 0.0;
  bool identical = true;
  for (const Setup& s : setups) {
    CsrMatrix k;
    std::vector<double> r;
    Assembler(model, fe, s.mode, s.batch, s.workers).assemble(u, 1.0, k, r);
    identical = identical && k.val.size() == k_ref.val.size() &&
                std::memcmp(k.val.data(), k_ref.val.data(), k.val.size() * sizeof(double)) == 0 &&
                std::memcmp(r.data(), r_ref.data(), r.size() * sizeof(double)) == 0;
    for (std::size_t i = 0; i < k.val.size(); ++i) err = std::max(err, std::abs(k.val[i] - k_ref.val[i]));
    for (std::size_t i = 0; i < r.size(); ++i) err = std::max(err, std::abs(r[i] - r_ref[i]));
  }
  VerifyCheck c = make_check("assembly_bitwise_equality", err, 0.0,
                             "n=" + std::to_string(n) + " twist cube; global, batch {1,497,all}, partitioned {1,2,4}");
  c.passed = identical;
  return c;
}

VerifyCheck check_tangent(const NcmDefinition& model, int n, std::uint64_t seed) {
  const FeModel fe = make_twist_cube(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  std::vector<double> u(fe.mesh.n_dofs());
  for (double& x : u) x = d(rng);
  Assembler asm_(model, fe, AssemblyMode::Batch, 1024);
  CsrMatrix k;
  std::vector<double> r, rp, rm;
  asm_.assemble(u, 0.0, k, r);
  std::uniform_int_distribution<std::size_t> pick(0, fe.mesh.n_dofs() - 1);
  double worst = 0.0;
  const double h = 1e-6;
  for (int col = 0; col < 20; ++col) {
    const std::size_t j = pick(rng);
    std::vector<double> up = u, um = u;
    up[j] += h;
    um[j] -= h;
    asm_.residual(up, 0.0, rp);
    asm_.residual(um, 0.0, rm);
    double num_err = 0.0, den = 0.0;
    for (std::size_t i = 0; i < k.n; ++i) {
      const double kij = k.at(i, j);
      num_err = std::max(num_err, std::abs((rp[i] - rm[i]) / (2 * h) - kij));
      den = std::max(den, std::abs(kij));
    }
    worst = std::max(worst, num_err / den);
  }
  return make_check("tangent_vs_fd_jacobian", worst, 1e-5,
                    "20 random columns, n=" + std::to_string(n) + " twist cube");
}

VerifyCheck check_newton_order(const NcmDefinition& model, int n) {
  const FeModel fe = make_twist_cube(n);
  NewtonConfig nc;
  nc.load_steps = 10;
  const NewtonResult res = newton_solve(model, fe, nc, {}, AssemblyMode::Batch, 1024, 1, false);
  if (!res.report.converged)
    return {"newton_superlinear", false, 0.0, 1.7, "did not converge: " + res.report.failure};
  // Order estimate from the last three norms above the round-off floor of
  // each step; the worst step is reported.
  double worst = INFINITY;
  std::size_t used = 0;
  for (const StepLog& s : res.report.steps) {
    if (!s.converged || s.residual_norms.empty()) continue;
    const double scale = *std::max_element(s.residual_norms.begin(), s.residual_norms.end());
    std::vector<double> v;
    for (double x : s.residual_norms)
      if (x > 1e-12 * scale) v.push_back(x);
    if (v.size() < 3) continue;
    const std::size_t k = v.size() - 1;
    const double order = std::log(v[k] / v[k - 1]) / std::log(v[k - 1] / v[k - 2]);
    worst = std::min(worst, order);
    ++used;
  }
  VerifyCheck c{"newton_superlinear", used > 0 && worst >= 1.7, worst, 1.7,
                "min order over " + std::to_string(used) + " load steps, n=" + std::to_string(n)};
  return c;
}

VerifyCheck check_loader_field_path() {
  std::mt19937_64 rng(3);
  NcmDefinition m = random_model(rng, Architecture::Micnn);
  nlohmann::json j = nlohmann::json::parse(model_to_string(m));
  j["layers"][1]["A"][0][0] = -0.5;
  try {
    model_from_string(j.dump());
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    const bool named = msg.find("layers[1].A[0][0]") != std::string::npos;
    return {"loader_rejects_negative_weight", named, 0.0, 0.0, msg};
  }
  return {"loader_rejects_negative_weight", false, 0.0, 0.0, "corrupted file was accepted"};
}

VerifyCheck check_reference_fit(const NcmDefinition& model) {
  if (!model.reference_fit) return {"reference_fit", true, 0.0, 0.0, "no reference_fit block"};
  const ReferenceFit& fit = *model.reference_fit;
  // Energies are compared relative to the undeformed state.
  const double psi0 = eval_point(model, Mat3::identity()).psi;
  double err = 0.0;
  for (LoadingPath p : kAllPaths)
    for (int k = 0; k <= fit.steps; ++k) {
      const Mat3 f = loading_path(p, fit.gamma_max * k / fit.steps);
      err = std::max(err, std::abs(eval_point(model, f).psi - psi0 - eval_gent_thomas(f).psi));
    }
  return make_check("reference_fit", err, fit.tolerance,
                    model.name + " vs gent_thomas on six paths up to gamma " + num(fit.gamma_max));
}

std::vector<VerifyCheck> run_verify(const RunConfig& cfg, const VerifyOptions& opts,
                                    const VerifyHooks& hooks) {
  std::vector<VerifyCheck> out;
  auto add = [&out](std::vector<VerifyCheck> v) { out.insert(out.end(), v.begin(), v.end()); };
  out.push_back(check_gent_thomas_identity());
  out.push_back(check_gent_thomas_dilation());
  add(check_cgo_vs_fd(cfg.seed, opts.triples_per_architecture, hooks));
  add(check_convexity(cfg.seed + 1, 200));
  out.push_back(check_cann_diagonal(cfg.seed + 2, 200));
  std::mt19937_64 rng(cfg.seed + 3);
  std::vector<NcmDefinition> models{gent_thomas_model()};
  for (Architecture a : kAllArchitectures) models.push_back(random_model(rng, a));
  std::optional<NcmDefinition> file_model;
  if (!cfg.model.empty()) {
    try {
      file_model = load_model(cfg.model);
      out.push_back({"model_file_valid", true, 0.0, 0.0, file_model->name});
      models.push_back(*file_model);
    } catch (const std::exception& e) {
      out.push_back({"model_file_valid", false, 0.0, 0.0, e.what()});
    }
  }
  add(check_objectivity(models, cfg.seed + 4, 20));
  out.push_back(check_partition_of_unity());
  const NcmDefinition& fe_model = file_model ? *file_model : models[1];
  out.push_back(check_assembly_equality(fe_model, opts.assembly_mesh, cfg.seed + 5));
  out.push_back(check_tangent(fe_model, opts.tangent_mesh, cfg.seed + 6));
  out.push_back(check_newton_order(file_model ? *file_model : gent_thomas_model(), opts.tangent_mesh));
  out.push_back(check_loader_field_path());
  if (file_model) {
    add(check_cgo_vs_fd_model(*file_model, cfg.seed + 7, 100, hooks));
    out.push_back(check_reference_fit(*file_model));
  }
  return out;
}

void write_verify_report(std::ostream& out, const std::vector<VerifyCheck>& checks) {
  out << "# ncmfe verify, version " << version_string() << "\n";
  out << "check,passed,max_error,tolerance,detail\n";
  for (const VerifyCheck& c : checks)
    out << c.name << "," << (c.passed ? "PASS" : "FAIL") << "," << short_num(c.max_error) << ","
        << short_num(c.tolerance) << "," << csv_field(c.detail) << "\n";
}

// --- Path scan --------------------------------------------------------------------

std::vector<PathScanRow> run_path_scan(const NcmDefinition& model, double gamma_max, int steps) {
  if (steps < 1) throw ValidationError("path_steps: must be at least 1");
  if (!(gamma_max >= 0.0)) throw ValidationError("gamma_max: must be non-negative");
  model.validate();
  const int last = gamma_max == 0.0 ? 0 : steps;
  std::vector<PathScanRow> rows;
  for (LoadingPath p : kAllPaths)
    for (int k = 0; k <= last; ++k) {
      PathScanRow r;
      r.path = p;
      r.gamma = last == 0 ? 0.0 : gamma_max * k / steps;
      r.status = "ok";
      try {
        const Mat3 f = loading_path(p, r.gamma);
        r.psi_reference = eval_gent_thomas(f).psi;
        r.psi_model = eval_point(model, f).psi;
      } catch (const DomainError& e) {
        r.psi_model = NAN;
        r.status = e.what();
      }
      rows.push_back(std::move(r));
    }
  return rows;
}

void write_path_scan_csv(std::ostream& out, const std::vector<PathScanRow>& rows,
                         const std::string& model_name) {
  out << "# ncmfe path scan, version " << version_string() << ", model " << model_name << "\n";
  out << "path,gamma,psi_model,psi_reference,abs_diff,status\n";
  for (const PathScanRow& r : rows)
    out << to_string(r.path) << "," << num(r.gamma) << "," << num(r.psi_model) << ","
        << num(r.psi_reference) << "," << num(std::abs(r.psi_model - r.psi_reference)) << ","
        << csv_field(r.status) << "\n";
}

// --- Solve ------------------------------------------------------------------------

SolveOutput run_solve(const RunConfig& cfg) {
  cfg.validate();
  const NcmDefinition model = model_or_reference(cfg);
  SolveOutput s;
  if (cfg.mesh.empty() && cfg.boundary.empty()) {
    s.fe = make_twist_cube(cfg.mesh_sizes.front());
  } else {
    if (cfg.boundary.empty()) throw ValidationError("boundary: required with a mesh file");
    s.fe = make_fe_model(cfg.mesh.empty() ? build_structured_cube(cfg.mesh_sizes.front())
                                          : load_mesh(cfg.mesh));
    std::ifstream in(cfg.boundary);
    if (!in) throw ValidationError(cfg.boundary + ": cannot open boundary file");
    apply_boundary_file(s.fe, in);
  }
  NcmDefinition m = model;
  if (!cfg.modes.empty()) m.mode = cfg.modes.front();
  s.result = newton_solve(m, s.fe, cfg.newton, cfg.cg, cfg.assembly.front(),
                          cfg.batch_sizes.back(), cfg.workers.front(), false);
  return s;
}

void write_displacements_csv(std::ostream& out, const SolveOutput& s) {
  out << "node,x,y,z,ux,uy,uz\n";
  for (std::size_t a = 0; a < s.fe.mesh.n_nodes(); ++a) {
    const Vec3& x = s.fe.mesh.nodes[a];
    out << a << "," << num(x[0]) << "," << num(x[1]) << "," << num(x[2]) << ","
        << num(s.result.u[3 * a]) << "," << num(s.result.u[3 * a + 1]) << ","
        << num(s.result.u[3 * a + 2]) << "\n";
  }
}

}  // namespace ncmfe
