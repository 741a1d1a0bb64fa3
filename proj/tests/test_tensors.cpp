#include <doctest.h>

#include <random>

#include "ncmfe/errors.hpp"
#include "ncmfe/tensors.hpp"
#include "oracles.hpp"

using namespace ncmfe;

namespace {

SymTensor3 random_sym(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  SymTensor3 s;
  for (double& x : s.v) x = n(rng);
  return s;
}

Vec3 random_vec(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return {n(rng), n(rng), n(rng)};
}

}  // namespace

TEST_CASE("sym_outer") {
  const SymTensor3 a = sym_outer({1, 0, 0}, {1, 0, 0});
  CHECK(a.v == std::array<double, 6>{1, 0, 0, 0, 0, 0});
  const SymTensor3 b = sym_outer({1, 0, 0}, {0, 1, 0});
  CHECK(b.v == std::array<double, 6>{0, 0, 0, 0.5, 0, 0});

  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vec3 x = random_vec(rng), y = random_vec(rng);
    const SymTensor3 s = sym_outer(x, y);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(s(i, j) == doctest::Approx(0.5 * (x[i] * y[j] + x[j] * y[i])));
  }
}

TEST_CASE("identity products") {
  const SymTensor3 id = SymTensor3::identity();
  const Stiffness3 o = tensor_prod(id, id);
  const Stiffness3 bar = tensor_prod_bar(id, id);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      CHECK(o(a, b) == (a < 3 && b < 3 ? 1.0 : 0.0));
      CHECK(bar(a, b) == (a != b ? 0.0 : (a < 3 ? 1.0 : 0.5)));
    }
}

TEST_CASE("tensor products match the dense index formulas") {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const SymTensor3 a = random_sym(rng), b = random_sym(rng);
    const auto o = oracle::voigt(oracle::outer(oracle::dense(a), oracle::dense(b)));
    const auto ob = oracle::voigt(oracle::outer_bar(oracle::dense(a), oracle::dense(b)));
    const Stiffness3 p = tensor_prod(a, b), pb = tensor_prod_bar(a, b);
    worst = std::max(worst, oracle::max_diff(p.v.data(), o.data(), 36));
    worst = std::max(worst, oracle::max_diff(pb.v.data(), ob.data(), 36));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("expand is consistent with Voigt access") {
  std::mt19937_64 rng(3);
  const Stiffness3 c = tensor_prod_bar(random_sym(rng), random_sym(rng)) + tensor_prod(random_sym(rng), random_sym(rng));
  const auto d = expand(c);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) CHECK(d[oracle::i4(i, j, k, l)] == c.at(i, j, k, l));
}

TEST_CASE("Voigt round trip") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const SymTensor3 s = random_sym(rng);
    CHECK(to_voigt(from_voigt(s)).v == s.v);
  }
}

TEST_CASE("Mat3 algebra") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  Mat3 a;
  for (double& x : a.v) x = n(rng);
  a = a + 3.0 * Mat3::identity();
  const Mat3 p = a * inverse(a);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(p(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
  CHECK(det(transpose(a)) == doctest::Approx(det(a)));
  CHECK_THROWS_AS(inverse(Mat3{}, 1e-12), DomainError);
  const SymTensor3 c = right_cauchy_green(a), b = left_cauchy_green(a);
  CHECK(trace(c) == doctest::Approx(trace(b)));
  CHECK(det(c) == doctest::Approx(det(a) * det(a)));
}

TEST_CASE("push_forward_stress") {
  const SymTensor3 b{{1.2, 0.9, 1.1, 0.1, -0.05, 0.02}};
  std::vector<SymTensor3> g{b};
  std::vector<double> zero{0.0};
  CHECK(push_forward_stress(zero, g).v == SymTensor3{}.v);
  std::vector<double> half{0.5};
  CHECK(push_forward_stress(half, g).v == b.v);
  std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(push_forward_stress(two, g), ValidationError);
}

TEST_CASE("push_forward_stiffness") {
  const SymTensor3 id = SymTensor3::identity();
  std::vector<SymTensor3> g{id};
  std::vector<Stiffness3> gg{Stiffness3{}};
  std::vector<double> d{0.0}, d2{0.0};
  CHECK(push_forward_stiffness(d, d2, g, gg).v == Stiffness3{}.v);

  // Psi = (I1 - 3)^2 at F = I: dPsi = 0, d2Psi = 2, G = B = I -> c = 8 I (x) I.
  std::vector<double> d2q{2.0};
  const Stiffness3 c = push_forward_stiffness(d, d2q, g, gg);
  const Stiffness3 expect = 8.0 * tensor_prod(id, id);
  CHECK(c.v == expect.v);

  std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS(push_forward_stiffness(d, bad, g, gg), ValidationError);
}

TEST_CASE("push_forward_stiffness has major symmetry") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  for (int t = 0; t < 20; ++t) {
    std::vector<SymTensor3> g;
    std::vector<Stiffness3> gg;
    for (int m = 0; m < 3; ++m) {
      const SymTensor3 a = random_sym(rng), b = random_sym(rng);
      g.push_back(a);
      gg.push_back(tensor_prod(a, a) + tensor_prod_bar(a, b) + tensor_prod_bar(b, a));
    }
    std::vector<double> d{n(rng), n(rng), n(rng)};
    std::vector<double> d2(9);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) d2[3 * i + j] = d2[3 * j + i] = n(rng);
    const Stiffness3 c = push_forward_stiffness(d, d2, g, gg);
    double asym = 0.0;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) asym = std::max(asym, std::abs(c(a, b) - c(b, a)));
    CHECK(asym < 1e-12 * oracle::max_abs(c.v.data(), 36));
  }
}
