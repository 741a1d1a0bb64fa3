#include "ncmfe/tensors.hpp"

#include <cmath>

#include "ncmfe/errors.hpp"

namespace ncmfe {

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}

Mat3 operator+(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int k = 0; k < 9; ++k) r.v[k] = a.v[k] + b.v[k];
  return r;
}

Mat3 operator-(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int k = 0; k < 9; ++k) r.v[k] = a.v[k] - b.v[k];
  return r;
}

Mat3 operator*(double s, const Mat3& a) {
  Mat3 r;
  for (int k = 0; k < 9; ++k) r.v[k] = s * a.v[k];
  return r;
}

Vec3 operator*(const Mat3& a, const Vec3& x) {
  return {a(0, 0) * x[0] + a(0, 1) * x[1] + a(0, 2) * x[2],
          a(1, 0) * x[0] + a(1, 1) * x[1] + a(1, 2) * x[2],
          a(2, 0) * x[0] + a(2, 1) * x[1] + a(2, 2) * x[2]};
}

Mat3 transpose(const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a(j, i);
  return r;
}

double det(const Mat3& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

double trace(const Mat3& a) { return a(0, 0) + a(1, 1) + a(2, 2); }

Mat3 inverse(const Mat3& a, double min_abs_det) {
  const double d = det(a);
  if (!(std::abs(d) > min_abs_det)) throw DomainError("singular 3x3 matrix");
  const double s = 1.0 / d;
  Mat3 r;
  r(0, 0) = s * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1));
  r(0, 1) = s * (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2));
  r(0, 2) = s * (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1));
  r(1, 0) = s * (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2));
  r(1, 1) = s * (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0));
  r(1, 2) = s * (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2));
  r(2, 0) = s * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
  r(2, 1) = s * (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1));
  r(2, 2) = s * (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0));
  return r;
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

SymTensor3 to_voigt(const Mat3& m) {
  SymTensor3 s;
  for (int a = 0; a < 6; ++a) {
    const auto [i, j] = kVoigtPairs[a];
    s[a] = i == j ? m(i, j) : 0.5 * (m(i, j) + m(j, i));
  }
  return s;
}

Mat3 from_voigt(const SymTensor3& s) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = s(i, j);
  return m;
}

SymTensor3 right_cauchy_green(const Mat3& f) {
  SymTensor3 c;
  for (int a = 0; a < 6; ++a) {
    const auto [i, j] = kVoigtPairs[a];
    c[a] = f(0, i) * f(0, j) + f(1, i) * f(1, j) + f(2, i) * f(2, j);
  }
  return c;
}

SymTensor3 left_cauchy_green(const Mat3& f) {
  SymTensor3 b;
  for (int a = 0; a < 6; ++a) {
    const auto [i, j] = kVoigtPairs[a];
    b[a] = f(i, 0) * f(j, 0) + f(i, 1) * f(j, 1) + f(i, 2) * f(j, 2);
  }
  return b;
}

SymTensor3 operator+(const SymTensor3& a, const SymTensor3& b) {
  SymTensor3 r;
  for (int k = 0; k < 6; ++k) r[k] = a[k] + b[k];
  return r;
}

SymTensor3 operator-(const SymTensor3& a, const SymTensor3& b) {
  SymTensor3 r;
  for (int k = 0; k < 6; ++k) r[k] = a[k] - b[k];
  return r;
}

SymTensor3 operator*(double s, const SymTensor3& a) {
  SymTensor3 r;
  for (int k = 0; k < 6; ++k) r[k] = s * a[k];
  return r;
}

SymTensor3 sym_product(const SymTensor3& a, const SymTensor3& b) {
  SymTensor3 r;
  for (int p = 0; p < 6; ++p) {
    const auto [i, j] = kVoigtPairs[p];
    double ab = 0.0, ba = 0.0;
    for (int k = 0; k < 3; ++k) {
      ab += a(i, k) * b(k, j);
      ba += b(i, k) * a(k, j);
    }
    r[p] = 0.5 * (ab + ba);
  }
  return r;
}

Vec3 operator*(const SymTensor3& a, const Vec3& x) {
  return {a[0] * x[0] + a[3] * x[1] + a[5] * x[2],
          a[3] * x[0] + a[1] * x[1] + a[4] * x[2],
          a[5] * x[0] + a[4] * x[1] + a[2] * x[2]};
}

double trace(const SymTensor3& a) { return a[0] + a[1] + a[2]; }

double det(const SymTensor3& a) {
  return a[0] * (a[1] * a[2] - a[4] * a[4]) - a[3] * (a[3] * a[2] - a[4] * a[5]) +
         a[5] * (a[3] * a[4] - a[1] * a[5]);
}

Stiffness3 operator+(const Stiffness3& a, const Stiffness3& b) {
  Stiffness3 r;
  for (int k = 0; k < 36; ++k) r.v[k] = a.v[k] + b.v[k];
  return r;
}

Stiffness3 operator-(const Stiffness3& a, const Stiffness3& b) {
  Stiffness3 r;
  for (int k = 0; k < 36; ++k) r.v[k] = a.v[k] - b.v[k];
  return r;
}

Stiffness3 operator*(double s, const Stiffness3& a) {
  Stiffness3 r;
  for (int k = 0; k < 36; ++k) r.v[k] = s * a.v[k];
  return r;
}

SymTensor3 sym_outer(const Vec3& a, const Vec3& b) {
  SymTensor3 s;
  for (int p = 0; p < 6; ++p) {
    const auto [i, j] = kVoigtPairs[p];
    s[p] = 0.5 * (a[i] * b[j] + a[j] * b[i]);
  }
  return s;
}

Stiffness3 tensor_prod(const SymTensor3& a, const SymTensor3& b) {
  Stiffness3 c;
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q) c(p, q) = a[p] * b[q];
  return c;
}

Stiffness3 tensor_prod_bar(const SymTensor3& a, const SymTensor3& b) {
  Stiffness3 c;
  for (int p = 0; p < 6; ++p) {
    const auto [i, j] = kVoigtPairs[p];
    for (int q = 0; q < 6; ++q) {
      const auto [k, l] = kVoigtPairs[q];
      c(p, q) = 0.25 * (a(i, k) * b(j, l) + a(i, l) * b(j, k) + a(j, k) * b(i, l) +
                        a(j, l) * b(i, k));
    }
  }
  return c;
}

std::array<double, 81> expand(const Stiffness3& c) {
  std::array<double, 81> full{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) full[((i * 3 + j) * 3 + k) * 3 + l] = c.at(i, j, k, l);
  return full;
}

void push_forward_stress(std::size_t m, const double* d_psi, const double* g, double* tau) {
  for (int a = 0; a < 6; ++a) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += d_psi[k] * g[6 * k + a];
    tau[a] = 2.0 * s;
  }
}

void push_forward_stiffness(std::size_t m, const double* d_psi, const double* d2_psi,
                            const double* g, const double* gg, double* c) {
  for (int k = 0; k < 36; ++k) c[k] = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    // h = sum_n d2(r, n) G^n, then c += G^r (x) h
    double h[6] = {0, 0, 0, 0, 0, 0};
    for (std::size_t n = 0; n < m; ++n) {
      const double w = d2_psi[r * m + n];
      for (int b = 0; b < 6; ++b) h[b] += w * g[6 * n + b];
    }
    const double* gr = g + 6 * r;
    const double* ggr = gg + 36 * r;
    const double dr = d_psi[r];
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) c[6 * a + b] += gr[a] * h[b] + dr * ggr[6 * a + b];
  }
  for (int k = 0; k < 36; ++k) c[k] *= 4.0;
}

SymTensor3 push_forward_stress(std::span<const double> d_psi, std::span<const SymTensor3> g) {
  if (d_psi.size() != g.size()) throw ValidationError("push_forward_stress: length mismatch");
  SymTensor3 tau;
  push_forward_stress(d_psi.size(), d_psi.data(), g.empty() ? nullptr : g[0].v.data(),
                      tau.v.data());
  return tau;
}

Stiffness3 push_forward_stiffness(std::span<const double> d_psi, std::span<const double> d2_psi,
                                  std::span<const SymTensor3> g,
                                  std::span<const Stiffness3> gg) {
  const std::size_t m = d_psi.size();
  if (g.size() != m || gg.size() != m || d2_psi.size() != m * m)
    throw ValidationError("push_forward_stiffness: dimension mismatch");
  Stiffness3 c;
  if (m == 0) return c;
  push_forward_stiffness(m, d_psi.data(), d2_psi.data(), g[0].v.data(), gg[0].v.data(),
                         c.v.data());
  return c;
}

}  // namespace ncmfe
