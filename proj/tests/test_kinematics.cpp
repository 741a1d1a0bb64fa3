#include <doctest.h>

#include <cmath>
#include <random>

#include "ncmfe/constitutive.hpp"
#include "ncmfe/errors.hpp"
#include "ncmfe/kinematics.hpp"
#include "oracles.hpp"

using namespace ncmfe;

namespace {

using oracle::Dense2;

Dense2 mat(const Mat3& m) { return m.v; }

Dense2 mul(const Dense2& a, const Dense2& b) {
  Dense2 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[3 * i + j] += a[3 * i + k] * b[3 * k + j];
  return r;
}

double tr(const Dense2& a) { return a[0] + a[4] + a[8]; }

double det3(const Dense2& a) {
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
         a[2] * (a[3] * a[7] - a[4] * a[6]);
}

double quad(const Vec3& x, const Dense2& m, const Vec3& y) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += x[i] * m[3 * i + j] * y[j];
  return s;
}

// Invariant value as a function of C, written from the definitions.
double invariant_of_c(const InvariantSpec& s, const KinematicConfig& cfg, const Dense2& c) {
  const double i3 = det3(c);
  const bool iso = cfg.variant == KinematicVariant::IsochoricPlusJ;
  double v = 0.0, e = -1.0 / 3.0;
  switch (s.kind) {
    case InvariantKind::I1: v = tr(c); break;
    case InvariantKind::I2: v = 0.5 * (tr(c) * tr(c) - tr(mul(c, c))); e = -2.0 / 3.0; break;
    case InvariantKind::I3: v = i3; break;
    case InvariantKind::J: return std::sqrt(i3);
    case InvariantKind::I4: v = quad(cfg.structural_vectors[s.i], c, cfg.structural_vectors[s.j]); break;
    case InvariantKind::I5:
      v = quad(cfg.structural_vectors[s.i], mul(c, c), cfg.structural_vectors[s.j]);
      e = -2.0 / 3.0;
      break;
  }
  return iso ? v * std::pow(i3, e) : v;
}

constexpr int kPairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}};

Dense2 perturb(Dense2 c, int a, double h) {
  const int i = kPairs[a][0], j = kPairs[a][1];
  c[3 * i + j] += h;
  if (i != j) c[3 * j + i] += h;
  return c;
}

// Symmetric-C derivatives by central differences: S_IJ and S2_IJKL.
struct FdInC {
  Dense2 s{};
  oracle::Dense4 s2{};
};

FdInC fd_in_c(const std::function<double(const Dense2&)>& k, const Dense2& c) {
  FdInC out;
  const double hg = 1e-6, hh = 1e-4;
  double d1[6], d2[6][6];
  for (int a = 0; a < 6; ++a)
    d1[a] = (k(perturb(c, a, hg)) - k(perturb(c, a, -hg))) / (2 * hg);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      d2[a][b] = (k(perturb(perturb(c, a, hh), b, hh)) - k(perturb(perturb(c, a, hh), b, -hh)) -
                  k(perturb(perturb(c, a, -hh), b, hh)) + k(perturb(perturb(c, a, -hh), b, -hh))) /
                 (4 * hh * hh);
  auto factor = [](int a) { return a < 3 ? 1.0 : 0.5; };
  for (int a = 0; a < 6; ++a) {
    const int i = kPairs[a][0], j = kPairs[a][1];
    out.s[3 * i + j] = out.s[3 * j + i] = d1[a] * factor(a);
    for (int b = 0; b < 6; ++b) {
      const int k2 = kPairs[b][0], l = kPairs[b][1];
      const double v = d2[a][b] * factor(a) * factor(b);
      for (auto [p, q] : {std::pair{i, j}, std::pair{j, i}})
        for (auto [r, t] : {std::pair{k2, l}, std::pair{l, k2}}) out.s2[oracle::i4(p, q, r, t)] = v;
    }
  }
  return out;
}

Dense2 push2(const Mat3& f, const Dense2& s) {
  Dense2 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int I = 0; I < 3; ++I)
        for (int J = 0; J < 3; ++J) r[3 * i + j] += f(i, I) * s[3 * I + J] * f(j, J);
  return r;
}

oracle::Dense4 push4(const Mat3& f, const oracle::Dense4& s) {
  // Contract one index at a time.
  oracle::Dense4 a = s, b{};
  for (int slot = 0; slot < 4; ++slot) {
    b.fill(0.0);
    for (int idx = 0; idx < 81; ++idx) {
      int d[4] = {idx / 27, (idx / 9) % 3, (idx / 3) % 3, idx % 3};
      const int big = d[slot];
      for (int x = 0; x < 3; ++x) {
        d[slot] = x;
        b[oracle::i4(d[0], d[1], d[2], d[3])] += f(x, big) * a[idx];
      }
    }
    a = b;
  }
  return a;
}

Vec3 unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v{n(rng), n(rng), n(rng)};
  const double l = norm(v);
  return {v[0] / l, v[1] / l, v[2] / l};
}

void check_against_fd(const KinematicConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst_g = 0.0, worst_gg = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Mat3 f = random_deformation(rng);
    const KinematicEval ev = eval_kinematics(f, cfg);
    const SymTensor3 cs = right_cauchy_green(f);
    const Dense2 c = oracle::dense(cs);
    for (std::size_t m = 0; m < cfg.size(); ++m) {
      const auto k = [&](const Dense2& cc) { return invariant_of_c(cfg.invariants[m], cfg, cc); };
      CHECK(ev.values[m] == doctest::Approx(k(c)).epsilon(1e-12));
      const FdInC d = fd_in_c(k, c);
      const Dense2 g = push2(f, d.s);
      const auto gg = oracle::voigt(push4(f, d.s2));
      const Dense2 gd = oracle::dense(ev.g[m]);
      worst_g = std::max(worst_g, oracle::max_diff(gd.data(), g.data(), 9) /
                                      std::max(1.0, oracle::max_abs(g.data(), 9)));
      worst_gg = std::max(worst_gg, oracle::max_diff(ev.gg[m].v.data(), gg.data(), 36) /
                                        std::max(1.0, oracle::max_abs(gg.data(), 36)));
    }
  }
  CHECK(worst_g < 1e-7);
  CHECK(worst_gg < 1e-5);
}

}  // namespace

TEST_CASE("identity kinematics") {
  const KinematicEval s = eval_standard(Mat3::identity(), KinematicConfig::standard());
  CHECK(s.values == std::vector<double>{3, 3, 1});
  CHECK(s.g[0].v == SymTensor3::identity().v);
  CHECK(s.g[1].v == (2.0 * SymTensor3::identity()).v);
  CHECK(s.g[2].v == SymTensor3::identity().v);

  const KinematicEval iso = eval_isochoric(Mat3::identity(), KinematicConfig::isochoric());
  CHECK(iso.values[0] == doctest::Approx(3.0));
  CHECK(iso.values[1] == doctest::Approx(3.0));
  CHECK(iso.values[2] == 1.0);
  CHECK(iso.g[2].v == (0.5 * SymTensor3::identity()).v);
}

TEST_CASE("uniaxial closed form") {
  const KinematicEval s = eval_standard(Mat3::diag(1.5, 1, 1), KinematicConfig::standard());
  CHECK(s.values[0] == doctest::Approx(4.25));
  CHECK(s.values[2] == doctest::Approx(2.25));
}

TEST_CASE("pure dilation leaves isochoric invariants unchanged") {
  const KinematicEval iso = eval_isochoric(Mat3::diag(2, 2, 2), KinematicConfig::isochoric());
  CHECK(iso.values[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(iso.values[1] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(iso.values[2] == doctest::Approx(8.0));
}

TEST_CASE("degenerate F is rejected") {
  CHECK_THROWS_AS(eval_standard(Mat3::diag(1, 1, 0), KinematicConfig::standard()), DomainError);
  CHECK_THROWS_AS(eval_isochoric(Mat3::diag(-1, 1, 1), KinematicConfig::isochoric()), DomainError);
}

TEST_CASE("config validation") {
  KinematicConfig bad = KinematicConfig::isochoric();
  bad.invariants.push_back({InvariantKind::I3});
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  KinematicConfig fib = KinematicConfig::standard();
  fib.invariants.push_back({InvariantKind::I4, 0, 0});
  CHECK_THROWS_AS(fib.validate(), ValidationError);
  fib.structural_vectors.push_back({1, 1, 0});
  CHECK_THROWS_AS(fib.validate(), ValidationError);
  fib.structural_vectors[0] = {1, 0, 0};
  CHECK_NOTHROW(fib.validate());
  CHECK_THROWS_AS(KinematicConfig{}.validate(), ValidationError);
  CHECK(parse_invariant("I5[0,1]") == InvariantSpec{InvariantKind::I5, 0, 1});
  CHECK(to_string(InvariantSpec{InvariantKind::I4, 1, 1}) == "I4[1,1]");
  CHECK_THROWS_AS(parse_invariant("I6"), ValidationError);
}

TEST_CASE("derivative tensors match FD in C: standard") {
  std::mt19937_64 rng(11);
  KinematicConfig cfg = KinematicConfig::standard();
  cfg.structural_vectors = {unit(rng), unit(rng)};
  cfg.with_fibres(true, true);
  check_against_fd(cfg, 12);
}

TEST_CASE("derivative tensors match FD in C: isochoric") {
  std::mt19937_64 rng(13);
  KinematicConfig cfg = KinematicConfig::isochoric();
  cfg.structural_vectors = {unit(rng), unit(rng)};
  cfg.with_fibres(true, true);
  check_against_fd(cfg, 14);
}

TEST_CASE("objectivity, dilation invariance and symmetry") {
  std::mt19937_64 rng(15);
  KinematicConfig std_cfg = KinematicConfig::standard();
  std_cfg.structural_vectors = {unit(rng)};
  std_cfg.with_fibres(true);
  KinematicConfig iso_cfg = KinematicConfig::isochoric();
  iso_cfg.structural_vectors = std_cfg.structural_vectors;
  iso_cfg.with_fibres(true);
  for (int t = 0; t < 100; ++t) {
    const Mat3 f = random_deformation(rng);
    const Mat3 q = random_rotation(rng);
    for (const KinematicConfig* cfg : {&std_cfg, &iso_cfg}) {
      const KinematicEval a = eval_kinematics(f, *cfg);
      const KinematicEval b = eval_kinematics(q * f, *cfg);
      for (std::size_t m = 0; m < cfg->size(); ++m) {
        CHECK(std::abs(a.values[m] - b.values[m]) < 1e-10 * std::max(1.0, std::abs(a.values[m])));
        const Stiffness3& gg = a.gg[m];
        double asym = 0.0;
        for (int i = 0; i < 6; ++i)
          for (int j = 0; j < 6; ++j) asym = std::max(asym, std::abs(gg(i, j) - gg(j, i)));
        CHECK(asym <= 1e-12 * std::max(1.0, oracle::max_abs(gg.v.data(), 36)));
      }
    }
    const double s = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    const KinematicEval a = eval_kinematics(f, iso_cfg);
    const KinematicEval b = eval_kinematics(s * f, iso_cfg);
    for (std::size_t m = 0; m < iso_cfg.size(); ++m) {
      if (iso_cfg.invariants[m].kind == InvariantKind::J) continue;
      CHECK(std::abs(a.values[m] - b.values[m]) < 1e-10 * std::max(1.0, std::abs(a.values[m])));
    }
  }
}

TEST_CASE("I4 cross pairs are symmetric in the vector indices") {
  std::mt19937_64 rng(16);
  KinematicConfig cfg = KinematicConfig::standard();
  cfg.structural_vectors = {unit(rng), unit(rng)};
  cfg.invariants = {{InvariantKind::I4, 0, 1}, {InvariantKind::I4, 1, 0},
                    {InvariantKind::I5, 0, 1}, {InvariantKind::I5, 1, 0}};
  const KinematicEval e = eval_kinematics(random_deformation(rng), cfg);
  CHECK(e.values[0] == doctest::Approx(e.values[1]).epsilon(1e-14));
  CHECK(e.values[2] == doctest::Approx(e.values[3]).epsilon(1e-14));
}

TEST_CASE("loading paths") {
  CHECK(loading_path(LoadingPath::SS, 0.0).v == Mat3::identity().v);
  const Mat3 ps = loading_path(LoadingPath::PS, 0.5);
  CHECK(ps.v == Mat3::diag(1.5, 1.0 / 1.5, 1.0).v);
  CHECK(loading_path(LoadingPath::BT, 0.2).v == Mat3::diag(1.2, 1.2, 1).v);
  const Mat3 ss = loading_path(LoadingPath::SS, 0.3);
  CHECK(ss(0, 1) == 0.3);
  CHECK(loading_path(LoadingPath::UC, 0.25).v == Mat3::diag(1 / 1.25, 1, 1).v);
  CHECK_THROWS_AS(loading_path(LoadingPath::UT, -1.0), DomainError);
  CHECK_NOTHROW(loading_path(LoadingPath::SS, -3.0));
  for (LoadingPath p : kAllPaths) CHECK(parse_loading_path(to_string(p)) == p);
}
