#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>

#include "ncmfe/errors.hpp"
#include "ncmfe/harness.hpp"
#include "ncmfe/memory.hpp"

using namespace ncmfe;

namespace {

RunConfig small_matpoint() {
  RunConfig cfg;
  cfg.n_points = {64};
  cfg.batch_sizes = {1, 8};
  cfg.repetitions = 2;
  return cfg;
}

std::size_t count_lines(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) ++n;
  return n;
}

}  // namespace

TEST_CASE("cgo vs fd check passes on the real evaluator") {
  for (const VerifyCheck& c : check_cgo_vs_fd(7, 10)) {
    INFO(c.name << " " << c.max_error);
    CHECK(c.passed);
  }
}

TEST_CASE("cgo vs fd check catches a sign-flipped stress") {
  VerifyHooks broken;
  broken.analytic = [](const NcmDefinition& m, MaterialBatch& b) {
    eval_batch(m, b);
    double* tau = const_cast<double*>(b.tau_data());
    for (std::size_t i = 0; i < 6 * b.size(); ++i) tau[i] = -tau[i];
  };
  const auto checks = check_cgo_vs_fd(7, 10, broken);
  const bool tau_failed = std::any_of(checks.begin(), checks.end(), [](const VerifyCheck& c) {
    return c.name.rfind("cgo_vs_fd_tau", 0) == 0 && !c.passed;
  });
  CHECK(tau_failed);
}

TEST_CASE("cgo vs fd check catches a scaled stiffness") {
  VerifyHooks broken;
  broken.analytic = [](const NcmDefinition& m, MaterialBatch& b) {
    eval_batch(m, b);
    double* c = const_cast<double*>(b.c_data());
    for (std::size_t i = 0; i < 36 * b.size(); ++i) c[i] *= 1.01;
  };
  const auto checks = check_cgo_vs_fd(7, 10, broken);
  for (const VerifyCheck& c : checks)
    if (c.name.rfind("cgo_vs_fd_stiffness", 0) == 0) CHECK_FALSE(c.passed);
}

TEST_CASE("reference fit is measured on the normalized energy") {
  NcmDefinition gt = gent_thomas_model();
  gt.reference_fit = ReferenceFit{"gent_thomas", 0.5, 10, 1e-12};
  const VerifyCheck c = check_reference_fit(gt);
  CHECK(c.passed);
  CHECK(c.max_error <= 1e-12);
}

TEST_CASE("loader field path check passes") { CHECK(check_loader_field_path().passed); }

TEST_CASE("matpoint bench produces one row per configuration and repetition") {
  const RunConfig cfg = small_matpoint();
  std::vector<BenchRecord> rows = run_matpoint_bench(cfg);
  // Three synthetic architectures x two modes x two batch sizes x two repetitions.
  CHECK(rows.size() == 3 * 2 * 2 * 2);
  std::set<std::string> archs;
  for (const BenchRecord& r : rows) {
    archs.insert(r.architecture);
    CHECK(r.experiment == "matpoint");
    CHECK(r.n_points == 64);
    CHECK(r.constitutive_ns > 0.0);
    CHECK(r.converged);
    if (r.batch_size == 1) CHECK(r.speedup == 1.0);
  }
  CHECK(archs == std::set<std::string>{"micnn", "cann", "ickan"});
}

TEST_CASE("batch sizes above the point count are clamped") {
  RunConfig cfg = small_matpoint();
  cfg.n_points = {4};
  cfg.batch_sizes = {1, 1024};
  cfg.repetitions = 1;
  for (const BenchRecord& r : run_matpoint_bench(cfg)) CHECK(r.batch_size <= 4);
}

TEST_CASE("speedups use the batch-one median of the same group") {
  std::vector<BenchRecord> rows;
  auto add = [&rows](std::size_t batch, double ns) {
    BenchRecord r;
    r.experiment = "matpoint";
    r.architecture = "micnn";
    r.mode = "cgo";
    r.n_points = 100;
    r.batch_size = batch;
    r.constitutive_ns = ns;
    r.total_ns = ns;
    rows.push_back(r);
  };
  add(1, 90), add(1, 100), add(1, 110), add(8, 20), add(8, 25), add(8, 30);
  compute_speedups(rows);
  for (const BenchRecord& r : rows) CHECK(r.speedup == doctest::Approx(r.batch_size == 1 ? 1.0 : 4.0));
}

TEST_CASE("bench csv has a header, comments and the config echo") {
  const RunConfig cfg = small_matpoint();
  std::vector<BenchRecord> rows = run_matpoint_bench(cfg);
  std::ostringstream out;
  write_bench_csv(out, rows, cfg);
  const std::string text = out.str();
  CHECK(count_lines(text, "experiment,version,") == 1);
  CHECK(count_lines(text, "matpoint,") == rows.size());
  CHECK(count_lines(text, "# config: " + cfg.echo()) == 1);
}

TEST_CASE("config echo is stable and names every key") {
  RunConfig a, b;
  CHECK(a.echo() == b.echo());
  b.seed = 7;
  CHECK(a.echo() != b.echo());
  for (const char* key : {"seed=", "batch_sizes=", "workers=", "mode=", "assembly=", "model="})
    CHECK(a.echo().find(key) != std::string::npos);
}

TEST_CASE("config validation names the key") {
  RunConfig cfg;
  cfg.batch_sizes = {0};
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("batch_sizes"), ValidationError);
  cfg = RunConfig{};
  cfg.repetitions = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("repetitions"), ValidationError);
}

TEST_CASE("path scan at zero amplitude gives one row per path") {
  const auto rows = run_path_scan(gent_thomas_model(), 0.0, 10);
  REQUIRE(rows.size() == 6);
  for (const PathScanRow& r : rows) {
    CHECK(r.gamma == 0.0);
    CHECK(r.status == "ok");
    CHECK(std::abs(r.psi_model) < 1e-14);
  }
}

TEST_CASE("path scan matches single-point evaluation") {
  const NcmDefinition gt = gent_thomas_model();
  const auto rows = run_path_scan(gt, 0.5, 5);
  CHECK(rows.size() == 6 * 6);
  for (const PathScanRow& r : rows) {
    CHECK(r.psi_model == eval_point(gt, loading_path(r.path, r.gamma)).psi);
    CHECK(r.psi_model == doctest::Approx(r.psi_reference).epsilon(1e-12));
  }
}

TEST_CASE("fe bench is deterministic across runs") {
  RunConfig cfg;
  cfg.mesh_sizes = {2};
  cfg.repetitions = 1;
  cfg.newton.load_steps = 2;
  cfg.assembly = {AssemblyMode::Traditional, AssemblyMode::Partitioned};
  cfg.workers = {2};
  const auto a = run_fe_bench(cfg), b = run_fe_bench(cfg);
  REQUIRE(a.size() == b.size());
  REQUIRE(!a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].converged);
    CHECK(a[i].digest == b[i].digest);
    CHECK(a[i].digest == a[0].digest);
    CHECK(a[i].newton_iterations == b[i].newton_iterations);
  }
}

TEST_CASE("allocation tracking sees a large buffer") {
  REQUIRE(memory_tracking_available());
  memory_reset_peak();
  const std::size_t before = memory_current_bytes();
  {
    auto buf = std::make_unique<double[]>(1 << 16);
    buf[0] = 1.0;
    CHECK(memory_current_bytes() >= before + 8 * (1 << 16));
  }
  CHECK(memory_peak_bytes() >= before + 8 * (1 << 16));
  CHECK(memory_current_bytes() == before);
}
