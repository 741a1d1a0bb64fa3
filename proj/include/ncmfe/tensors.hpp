#pragma once

// Small dense 3x3 algebra and Voigt-form symmetric tensors.
//
// Voigt ordering is (11, 22, 33, 12, 23, 13) everywhere. Both SymTensor3 and
// the rows/columns of Stiffness3 use the stress-like convention: shear slots
// hold the tensor component itself, never twice it.

#include <array>
#include <cstddef>
#include <span>

namespace ncmfe {

using Vec3 = std::array<double, 3>;

struct Mat3 {
  std::array<double, 9> v{};  // row-major

  constexpr double& operator()(int i, int j) { return v[3 * i + j]; }
  constexpr double operator()(int i, int j) const { return v[3 * i + j]; }

  static constexpr Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
  static constexpr Mat3 diag(double a, double b, double c) {
    return Mat3{{a, 0, 0, 0, b, 0, 0, 0, c}};
  }
};

/// Voigt slot -> (row, col) of the symmetric tensor.
inline constexpr std::array<std::array<int, 2>, 6> kVoigtPairs{
    {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}}};

/// (row, col) -> Voigt slot.
inline constexpr std::array<std::array<int, 3>, 3> kVoigtIndex{
    {{0, 3, 5}, {3, 1, 4}, {5, 4, 2}}};

struct SymTensor3 {
  std::array<double, 6> v{};

  constexpr double& operator[](int a) { return v[a]; }
  constexpr double operator[](int a) const { return v[a]; }
  constexpr double operator()(int i, int j) const { return v[kVoigtIndex[i][j]]; }

  static constexpr SymTensor3 identity() { return SymTensor3{{1, 1, 1, 0, 0, 0}}; }
};

/// Fourth-order tensor with both minor symmetries, stored as a 6x6 Voigt
/// matrix (row-major).
struct Stiffness3 {
  std::array<double, 36> v{};

  constexpr double& operator()(int a, int b) { return v[6 * a + b]; }
  constexpr double operator()(int a, int b) const { return v[6 * a + b]; }

  /// Full-index access c_ijkl.
  constexpr double at(int i, int j, int k, int l) const {
    return v[6 * kVoigtIndex[i][j] + kVoigtIndex[k][l]];
  }
};

static_assert(sizeof(SymTensor3) == 6 * sizeof(double));
static_assert(sizeof(Stiffness3) == 36 * sizeof(double));
static_assert(sizeof(Mat3) == 9 * sizeof(double));

// --- Mat3 ------------------------------------------------------------------

Mat3 operator*(const Mat3& a, const Mat3& b);
Mat3 operator+(const Mat3& a, const Mat3& b);
Mat3 operator-(const Mat3& a, const Mat3& b);
Mat3 operator*(double s, const Mat3& a);
Vec3 operator*(const Mat3& a, const Vec3& x);
Mat3 transpose(const Mat3& a);
double det(const Mat3& a);
double trace(const Mat3& a);
/// Throws DomainError when |det| is below `min_abs_det`.
Mat3 inverse(const Mat3& a, double min_abs_det = 0.0);

double dot(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

// --- Voigt conversion ------------------------------------------------------

/// Packs the symmetric part of `m`; lossless when `m` is symmetric.
SymTensor3 to_voigt(const Mat3& m);
Mat3 from_voigt(const SymTensor3& s);

/// C = F^T F and B = F F^T.
SymTensor3 right_cauchy_green(const Mat3& f);
SymTensor3 left_cauchy_green(const Mat3& f);

SymTensor3 operator+(const SymTensor3& a, const SymTensor3& b);
SymTensor3 operator-(const SymTensor3& a, const SymTensor3& b);
SymTensor3 operator*(double s, const SymTensor3& a);
/// sym(A B) = (A B + B A) / 2.
SymTensor3 sym_product(const SymTensor3& a, const SymTensor3& b);
Vec3 operator*(const SymTensor3& a, const Vec3& x);
double trace(const SymTensor3& a);
double det(const SymTensor3& a);

Stiffness3 operator+(const Stiffness3& a, const Stiffness3& b);
Stiffness3 operator-(const Stiffness3& a, const Stiffness3& b);
Stiffness3 operator*(double s, const Stiffness3& a);

// --- Products --------------------------------------------------------------

/// sym(a (x) b) = (a_i b_j + a_j b_i) / 2.
SymTensor3 sym_outer(const Vec3& a, const Vec3& b);

/// (A (x) B)_ijkl = A_ij B_kl.
Stiffness3 tensor_prod(const SymTensor3& a, const SymTensor3& b);

/// (A (x)bar B)_ijkl = (A_ik B_jl + A_il B_kj) / 2, projected onto the
/// minor-symmetric subspace (averaged over i <-> j). The projection is exact
/// for A == B and for the symmetric sums A (x)bar B + B (x)bar A.
Stiffness3 tensor_prod_bar(const SymTensor3& a, const SymTensor3& b);

/// Dense 81-entry expansion c_ijkl, index ((i*3 + j)*3 + k)*3 + l.
std::array<double, 81> expand(const Stiffness3& c);

// --- Push-forwards ---------------------------------------------------------

/// tau = 2 sum_m dPsi/dK_m G^m.
SymTensor3 push_forward_stress(std::span<const double> d_psi,
                               std::span<const SymTensor3> g);

/// c = 4 sum_mn d2Psi/dK_m dK_n G^m (x) G^n + 4 sum_m dPsi/dK_m GG^m.
/// `d2_psi` is row-major m x m.
Stiffness3 push_forward_stiffness(std::span<const double> d_psi,
                                  std::span<const double> d2_psi,
                                  std::span<const SymTensor3> g,
                                  std::span<const Stiffness3> gg);

/// Raw-pointer kernels shared by the batch path; same arithmetic as the
/// span overloads above. `g` holds m*6 scalars, `gg` m*36, `d2_psi` m*m.
void push_forward_stress(std::size_t m, const double* d_psi, const double* g,
                         double* tau);
void push_forward_stiffness(std::size_t m, const double* d_psi,
                            const double* d2_psi, const double* g,
                            const double* gg, double* c);

}  // namespace ncmfe
