#include <doctest.h>

#include <cmath>
#include <random>

#include "ncmfe/constitutive.hpp"
#include "ncmfe/errors.hpp"
#include "ncmfe/synthetic.hpp"
#include "oracles.hpp"

using namespace ncmfe;

namespace {

// Gent-Thomas first Piola stress written directly in terms of F.
oracle::Dense2 gent_thomas_piola(const Mat3& f) {
  const Mat3 c = transpose(f) * f;
  const Mat3 fc = f * c;
  const Mat3 fit = transpose(inverse(f));
  const double j = det(f), i1 = trace(c);
  const double i2 = 0.5 * (i1 * i1 - trace(c * c));
  const double j23 = std::pow(j, -2.0 / 3.0), j43 = j23 * j23;
  const double i2bar = j43 * i2;
  oracle::Dense2 p{};
  for (int a = 0; a < 9; ++a) {
    const double di1 = j23 * (2.0 * f.v[a] - 2.0 / 3.0 * i1 * fit.v[a]);
    const double di2 = j43 * (2.0 * (i1 * f.v[a] - fc.v[a]) - 4.0 / 3.0 * i2 * fit.v[a]);
    p[a] = 0.5 * di1 + di2 / i2bar + 2.0 * (j - 1.0) * j * fit.v[a];
  }
  return p;
}

double gent_thomas_psi(const Mat3& f) {
  const Mat3 c = transpose(f) * f;
  const double j = det(f), i1 = trace(c);
  const double i2 = 0.5 * (i1 * i1 - trace(c * c));
  return 0.5 * (i1 * std::pow(j, -2.0 / 3.0) - 3.0) + std::log(i2 * std::pow(j, -4.0 / 3.0) / 3.0) +
         (j - 1.0) * (j - 1.0);
}

std::vector<NcmDefinition> all_models(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<NcmDefinition> out{gent_thomas_model()};
  for (Architecture a : kAllArchitectures) {
    out.push_back(random_model(rng, a, KinematicConfig::isochoric()));
    out.push_back(random_model(rng, a, KinematicConfig::standard()));
  }
  return out;
}

}  // namespace

TEST_CASE("Gent-Thomas anchors") {
  const PointResult id = eval_gent_thomas(Mat3::identity());
  CHECK(std::abs(id.psi) <= 1e-12);
  CHECK(oracle::max_abs(id.tau.v.data(), 6) <= 1e-12);
  // Positive volumetric block at the reference state.
  double vol = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) vol += id.c(a, b);
  CHECK(vol > 0.0);
  const PointResult dil = eval_gent_thomas(Mat3::diag(2, 2, 2));
  CHECK(std::abs(dil.psi - 49.0) <= 1e-10);
}

TEST_CASE("Gent-Thomas matches the closed-form energy, stress and FD stiffness") {
  std::mt19937_64 rng(21);
  double et = 0.0, ec = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Mat3 f = random_deformation(rng);
    const PointResult r = eval_gent_thomas(f);
    CHECK(r.psi == doctest::Approx(gent_thomas_psi(f)).epsilon(1e-12));
    const oracle::Dense2 tau = oracle::kirchhoff(gent_thomas_piola(f), f);
    const oracle::Dense2 td = oracle::dense(r.tau);
    et = std::max(et, oracle::rel_diff(td.data(), tau.data(), 9));
    const auto c = oracle::voigt(oracle::fd_spatial_stiffness(gent_thomas_piola, f));
    ec = std::max(ec, oracle::rel_diff(r.c.v.data(), c.data(), 36));
  }
  CHECK(et < 1e-12);
  CHECK(ec < 1e-7);
}

TEST_CASE("Gent-Thomas stress at uniaxial stretch matches FD of the energy") {
  const Mat3 f = Mat3::diag(1.2, 1, 1);
  const PointResult r = eval_gent_thomas(f);
  const oracle::Dense2 tau = oracle::kirchhoff(oracle::fd_piola(gent_thomas_psi, f), f);
  const oracle::Dense2 td = oracle::dense(r.tau);
  CHECK(oracle::rel_diff(td.data(), tau.data(), 9) < 1e-8);
}

TEST_CASE("zero inner weights give zero response") {
  std::mt19937_64 rng(22);
  NcmDefinition m = random_model(rng, Architecture::Micnn);
  for (auto& l : std::get<MicnnWeights>(m.network).layers) {
    std::fill(l.a.begin(), l.a.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  const PointResult r = eval_point(m, random_deformation(rng));
  CHECK(r.psi == 0.0);
  CHECK(oracle::max_abs(r.tau.v.data(), 6) == 0.0);
  CHECK(oracle::max_abs(r.c.v.data(), 36) == 0.0);
}

TEST_CASE("CGO agrees with the FD baseline") {
  std::mt19937_64 rng(23);
  double et = 0.0, ec = 0.0;
  for (const NcmDefinition& cgo : all_models(24)) {
    NcmDefinition fd = cgo;
    fd.mode = DerivativeMode::FD;
    for (int t = 0; t < 15; ++t) {
      const Mat3 f = random_deformation(rng);
      const PointResult a = eval_point(cgo, f), b = eval_point(fd, f);
      CHECK(a.psi == b.psi);
      et = std::max(et, oracle::rel_diff(a.tau.v.data(), b.tau.v.data(), 6));
      ec = std::max(ec, oracle::rel_diff(a.c.v.data(), b.c.v.data(), 36));
    }
  }
  CHECK(et < 1e-5);
  CHECK(ec < 1e-3);
}

TEST_CASE("batch evaluation equals the point loop bit for bit") {
  std::mt19937_64 rng(25);
  for (const NcmDefinition& base : all_models(26)) {
    for (DerivativeMode mode : {DerivativeMode::CGO, DerivativeMode::FD}) {
      NcmDefinition m = base;
      m.mode = mode;
      for (std::size_t n : {1u, 7u, 64u, 1000u}) {
        if (mode == DerivativeMode::FD && n == 1000) continue;
        MaterialBatch batch(n, m.kinematics.size());
        batch.set_size(n);
        for (std::size_t p = 0; p < n; ++p) batch.set_f(p, random_deformation(rng));
        eval_batch(m, batch);
        bool same = true;
        for (std::size_t p = 0; p < n; ++p) {
          const PointResult r = eval_point(m, batch.get_f(p));
          same = same && r.psi == batch.psi(p) && std::equal(r.tau.v.begin(), r.tau.v.end(), batch.tau(p)) &&
                 std::equal(r.c.v.begin(), r.c.v.end(), batch.c(p));
        }
        CHECK_MESSAGE(same, base.architecture(), " n=", n, " mode=", to_string(mode));
      }
    }
  }
}

TEST_CASE("batch errors name the offending point") {
  const NcmDefinition m = gent_thomas_model();
  MaterialBatch batch(10, 3);
  batch.set_size(10);
  for (std::size_t p = 0; p < 10; ++p) batch.set_f(p, Mat3::identity());
  batch.set_f(6, Mat3::diag(-1, 1, 1));
  try {
    eval_batch(m, batch);
    FAIL("expected an error");
  } catch (const PointError& e) {
    CHECK(e.index() == 6);
  }
  NcmDefinition fd = m;
  fd.mode = DerivativeMode::FD;
  try {
    eval_batch(fd, batch);
    FAIL("expected an error");
  } catch (const PointError& e) {
    CHECK(e.index() == 6);
  }
  CHECK_THROWS_AS(batch.set_size(11), ValidationError);
}

TEST_CASE("objectivity of energy and stress") {
  std::mt19937_64 rng(27);
  for (const NcmDefinition& m : all_models(28)) {
    for (int t = 0; t < 10; ++t) {
      const Mat3 f = random_deformation(rng), q = random_rotation(rng);
      const PointResult a = eval_point(m, f), b = eval_point(m, q * f);
      CHECK(std::abs(a.psi - b.psi) < 1e-9 * std::max(1.0, std::abs(a.psi)));
      const Mat3 rot = q * from_voigt(a.tau) * transpose(q);
      const SymTensor3 expect = to_voigt(rot);
      CHECK(oracle::max_diff(expect.v.data(), b.tau.v.data(), 6) <
            1e-9 * std::max(1.0, oracle::max_abs(a.tau.v.data(), 6)));
    }
  }
}

TEST_CASE("model validation") {
  std::mt19937_64 rng(29);
  NcmDefinition m = random_model(rng, Architecture::Micnn);
  m.kinematics = KinematicConfig::standard();
  m.kinematics.structural_vectors = {{1, 0, 0}};
  m.kinematics.with_fibres(false);
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("path scan") {
  const NcmDefinition gt = gent_thomas_model();
  const auto zero = path_scan(gt, LoadingPath::UT, 0.0, 10);
  REQUIRE(zero.size() == 1);
  CHECK(zero[0].gamma == 0.0);
  CHECK(std::abs(zero[0].psi) < 1e-12);
  const auto ps = path_scan(gt, LoadingPath::PS, 0.5, 5);
  REQUIRE(ps.size() == 6);
  CHECK(ps.back().gamma == 0.5);
  CHECK(ps.back().psi == eval_point(gt, loading_path(LoadingPath::PS, 0.5)).psi);
  CHECK_THROWS_AS(path_scan(gt, LoadingPath::UC, -1.5, 3), DomainError);
  CHECK_THROWS_AS(path_scan(gt, LoadingPath::UC, 0.5, 0), ValidationError);
}

TEST_CASE("random deformation sampler respects the determinant floor") {
  std::mt19937_64 a(30), b(30);
  for (int t = 0; t < 200; ++t) {
    const Mat3 f = random_deformation(a);
    CHECK(det(f) > 0.2);
    CHECK(f.v == random_deformation(b).v);
  }
  std::mt19937_64 rng(31);
  const Mat3 q = random_rotation(rng);
  CHECK(det(q) == doctest::Approx(1.0));
}
