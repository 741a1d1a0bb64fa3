// Acceptance run: one PASS/FAIL line per criterion, measured values alongside.
//
//   acceptance [--only 1,3] [--expect-fail 4]
//
// Exit status is 0 when the set of failing criteria equals the expected set.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ncmfe/harness.hpp"
#include "ncmfe/synthetic.hpp"

using namespace ncmfe;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string failed_checks(const std::vector<VerifyCheck>& checks, bool& all) {
  std::string names;
  all = true;
  for (const VerifyCheck& c : checks)
    if (!c.passed) {
      all = false;
      names += (names.empty() ? "" : " ") + c.name + "=" + fmt(c.max_error);
    }
  return names;
}

constexpr std::uint64_t kSeed = 20240601;

Outcome cgo_correctness() {
  const auto t0 = Clock::now();
  const auto checks = check_cgo_vs_fd(kSeed, 100);
  const double t = seconds_since(t0);
  bool ok;
  const std::string bad = failed_checks(checks, ok);
  std::string worst;
  for (const VerifyCheck& c : checks) worst += c.name + "=" + fmt(c.max_error) + " ";
  return {ok && t < 30.0, worst + "time=" + fmt(t) + "s (limit 30s)" + (bad.empty() ? "" : " failed: " + bad)};
}

Outcome assembly_equality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(kSeed);
  std::vector<NcmDefinition> models{gent_thomas_model()};
  for (Architecture a : kAllArchitectures) models.push_back(random_model(rng, a));
  bool ok = true;
  std::string detail;
  for (const NcmDefinition& m : models) {
    const VerifyCheck c = check_assembly_equality(m, 4, kSeed + 1);
    ok = ok && c.passed;
    detail += m.architecture() + (c.passed ? ":identical " : ":differs(" + fmt(c.max_error) + ") ");
  }
  const double t = seconds_since(t0);
  return {ok && t < 60.0, detail + "time=" + fmt(t) + "s (limit 60s)"};
}

Outcome tangent_consistency() {
  std::mt19937_64 rng(kSeed + 2);
  std::vector<NcmDefinition> models{gent_thomas_model()};
  for (Architecture a : kAllArchitectures) models.push_back(random_model(rng, a));
  bool ok = true;
  std::string detail;
  for (const NcmDefinition& m : models) {
    const VerifyCheck c = check_tangent(m, 3, kSeed + 3);
    ok = ok && c.passed;
    detail += m.architecture() + "=" + fmt(c.max_error) + " ";
  }
  const VerifyCheck order = check_newton_order(gent_thomas_model(), 4);
  return {ok && order.passed,
          "tangent rel err " + detail + "(limit 1e-5); newton order " + fmt(order.max_error) + " (min 1.7)"};
}

Outcome twist_physics() {
  const auto t0 = Clock::now();
  const NewtonResult res =
      newton_solve(gent_thomas_model(), make_twist_cube(8), NewtonConfig{}, CgConfig{}, AssemblyMode::Batch, 1024, 1,
                   false);
  const double t = seconds_since(t0);
  const NewtonReport& r = res.report;
  const bool ok = r.converged && r.max_trace_c > 16.0 && t < 300.0;
  return {ok, std::string("converged=") + (r.converged ? "yes" : "no") + " max tr(C)=" + fmt(r.max_trace_c) +
                  " (need > 16) time=" + fmt(t) + "s (limit 300s)"};
}

// Median wall time of `f` over `reps` runs after one warm-up.
double time_median(const std::function<void()>& f, int reps) {
  f();
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    f();
    t.push_back(seconds_since(t0));
  }
  return median(t);
}

// Per-call wall time for the slope fits: each sample repeats `f` for at
// least `min_seconds`, and the fastest of `samples` is kept so that
// scheduler noise on short calls does not tilt the fit.
double time_best(const std::function<void()>& f, int samples, double min_seconds = 0.02) {
  f();
  double best = INFINITY;
  for (int i = 0; i < samples; ++i) {
    const auto t0 = Clock::now();
    int calls = 0;
    do {
      f();
      ++calls;
    } while (seconds_since(t0) < min_seconds);
    best = std::min(best, seconds_since(t0) / calls);
  }
  return best;
}

NcmDefinition bench_micnn() {
  std::mt19937_64 rng(kSeed + 4);
  return random_model(rng, Architecture::Micnn);
}

// Evaluates n_points seeded deformations in blocks of `batch`.
std::function<void()> matpoint_sweep(const NcmDefinition& model, std::size_t n_points, std::size_t batch) {
  std::mt19937_64 rng(kSeed + 5);
  auto fs = std::make_shared<std::vector<Mat3>>(n_points);
  for (Mat3& f : *fs) f = random_deformation(rng);
  auto b = std::make_shared<MaterialBatch>(batch, model.kinematics.size());
  return [&model, fs, b, n_points, batch] {
    for (std::size_t s = 0; s < n_points; s += batch) {
      const std::size_t count = std::min(batch, n_points - s);
      b->set_size(count);
      for (std::size_t p = 0; p < count; ++p) b->set_f(p, (*fs)[s + p]);
      eval_batch(model, *b);
    }
  };
}

double matpoint_median(const NcmDefinition& model, std::size_t n_points, std::size_t batch, int reps) {
  return time_median(matpoint_sweep(model, n_points, batch), reps);
}

std::vector<double> random_u(std::size_t n, double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-amp, amp);
  std::vector<double> u(n);
  for (double& x : u) x = d(rng);
  return u;
}

Outcome scaling_shapes() {
  const NcmDefinition micnn = bench_micnn();
  std::vector<double> x, y;
  for (std::size_t np : {2048, 8192, 32768, 131072}) {
    x.push_back(static_cast<double>(np));
    y.push_back(time_best(matpoint_sweep(micnn, np, 1024), 7));
  }
  const double s_mat = loglog_slope(x, y);

  const NcmDefinition gt = gent_thomas_model();
  // DOFs grow as 3 (n+1)^3 against n^3 elements; small cubes would bias the
  // slope upward, so the sweep starts at n = 8.
  std::vector<double> dofs, t_asm, t_cg;
  for (int n : {8, 10, 12, 16, 20}) {
    const FeModel fe = make_twist_cube(n);
    Assembler a(gt, fe, AssemblyMode::Batch, 1024);
    const std::vector<double> u = random_u(fe.mesh.n_dofs(), 0.01, kSeed + n);
    CsrMatrix k;
    std::vector<double> r;
    dofs.push_back(static_cast<double>(fe.mesh.n_dofs()));
    t_asm.push_back(time_best([&] { a.assemble(u, 1.0, k, r); }, 7));
  }
  const double s_asm = loglog_slope(dofs, t_asm);

  // First linear solve of the twist: tangent at u = 0, prescribed increment
  // of a tenth of the full load.
  std::vector<double> cg_dofs;
  for (int n : {6, 8, 10, 12, 14}) {
    const FeModel fe = make_twist_cube(n);
    Assembler a(gt, fe, AssemblyMode::Batch, 1024);
    const std::vector<double> u(fe.mesh.n_dofs(), 0.0);
    CsrMatrix k;
    std::vector<double> r, prescribed(fe.mesh.n_dofs(), 0.0);
    a.assemble(u, 0.0, k, r);
    for (const DirichletDof& d : fe.dofs.dirichlet) prescribed[d.dof] = d.value(0.1);
    std::vector<double> b(fe.mesh.n_dofs(), 0.0);
    apply_dirichlet(k, b, fe.dofs.constrained, prescribed);
    cg_dofs.push_back(static_cast<double>(fe.mesh.n_dofs()));
    t_cg.push_back(time_best([&] { cg_jacobi(k, b, CgConfig{}); }, 5));
  }
  const double s_cg = loglog_slope(cg_dofs, t_cg);
  const bool ok = std::abs(s_mat - 1.0) <= 0.15 && std::abs(s_asm - 1.0) <= 0.15 && s_cg >= 1.2 && s_cg <= 1.6;
  return {ok, "matpoint slope=" + fmt(s_mat) + " (1+-0.15) assembly slope=" + fmt(s_asm) +
                  " (1+-0.15) cg slope=" + fmt(s_cg) + " ([1.2,1.6])"};
}

Outcome speedups() {
  NcmDefinition cgo = bench_micnn(), fd = cgo;
  cgo.mode = DerivativeMode::CGO;
  fd.mode = DerivativeMode::FD;
  const std::size_t np = 16384;
  const double t_cgo = matpoint_median(cgo, np, 1024, 5), t_fd = matpoint_median(fd, np, 1024, 5);
  const double ratio = t_fd / t_cgo;

  const std::vector<std::size_t> batches{1, 4, 16, 64, 256, 1024, 4096, 16384};
  std::vector<double> t;
  for (std::size_t b : batches) t.push_back(matpoint_median(cgo, np, b, 5));
  const std::size_t best = std::min_element(t.begin(), t.end()) - t.begin();
  const bool beats_one = t[best] < t[0];
  // Interior optimum, or the largest batches within 10% of each other.
  const bool interior = best > 0 && best + 1 < t.size();
  const bool plateau = best + 1 == t.size() && t[t.size() - 2] <= 1.1 * t.back();
  std::string sweep;
  for (std::size_t i = 0; i < t.size(); ++i) sweep += std::to_string(batches[i]) + ":" + fmt(t[i] * 1e3) + "ms ";
  const bool ok = ratio >= 10.0 && beats_one && (interior || plateau);
  return {ok, "cgo/fd at 1024=" + fmt(ratio) + "x (min 10) best batch=" + std::to_string(batches[best]) +
                  " speedup vs 1=" + fmt(t[0] / t[best]) + " shape=" +
                  (interior ? "interior optimum" : plateau ? "plateau" : "monotone") + " sweep " + sweep};
}

Outcome invariant_suite() {
  RunConfig cfg;
  cfg.seed = kSeed;
  const auto checks = run_verify(cfg);
  bool ok;
  const std::string bad = failed_checks(checks, ok);
  return {ok, std::to_string(checks.size()) + " checks" + (ok ? ", all pass" : ", failed: " + bad)};
}

Outcome gent_thomas_anchors() {
  const VerifyCheck id = check_gent_thomas_identity(), dil = check_gent_thomas_dilation();
  return {id.passed && dil.passed, "identity err=" + fmt(id.max_error) + " (1e-12) dilation err=" +
                                       fmt(dil.max_error) + " (1e-10)"};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');)
    if (!tok.empty()) out.insert(std::stoi(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ncmfe acceptance criteria"};
  std::string only, expect;
  app.add_option("--only", only, "comma-separated criteria to run (default all)");
  app.add_option("--expect-fail", expect, "comma-separated criteria known to fail");
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"cgo correctness", cgo_correctness}},
      {2, {"assembly equality", assembly_equality}},
      {3, {"tangent consistency", tangent_consistency}},
      {4, {"twist cube physics", twist_physics}},
      {5, {"scaling shapes", scaling_shapes}},
      {6, {"directional speed-ups", speedups}},
      {7, {"architecture invariants", invariant_suite}},
      {8, {"gent-thomas anchors", gent_thomas_anchors}},
  };
  const std::set<int> selected = parse_list(only), expected = parse_list(expect);
  std::set<int> failed;
  std::printf("ncmfe acceptance, version %s\n", version_string().c_str());
  for (const auto& [id, c] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) failed.insert(id);
    std::printf("%s %d %s: %s\n", o.passed ? "PASS" : "FAIL", id, c.first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::set<int> expected_run;
  for (int id : expected)
    if (selected.empty() || selected.count(id)) expected_run.insert(id);
  if (failed == expected_run) return 0;
  for (int id : failed)
    if (!expected_run.count(id)) std::printf("unexpected failure: %d\n", id);
  for (int id : expected_run)
    if (!failed.count(id)) std::printf("expected failure did not occur: %d\n", id);
  return 1;
}
