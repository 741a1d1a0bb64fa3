#include "ncmfe/inner_networks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ncmfe/errors.hpp"

namespace ncmfe {

namespace {

constexpr int kMaxSplineOrder = 7;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_finite(double x, const std::string& where) {
  if (!std::isfinite(x)) throw ValidationError(where + ": non-finite value");
}

std::size_t packed_size(std::size_t m) { return m * (m + 1) / 2; }

// Packed upper-triangle index of (a, b), a <= b.
std::size_t packed_index(std::size_t m, std::size_t a, std::size_t b) {
  return a * m - a * (a - 1) / 2 + (b - a);
}

void unpack_hessian(std::size_t m, std::size_t n, const double* packed, double* full) {
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a; b < m; ++b) {
      const double* src = packed + packed_index(m, a, b) * n;
      double* ab = full + (a * m + b) * n;
      double* ba = full + (b * m + a) * n;
      for (std::size_t p = 0; p < n; ++p) ab[p] = ba[p] = src[p];
    }
}

// Softplus and its first two derivatives from a single exponential.
struct Softplus {
  double value, d1, d2;
};

inline Softplus softplus(double y) {
  const double e = std::exp(-std::abs(y));
  const double sig = y >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  return {std::max(y, 0.0) + std::log1p(e), sig, sig * (1.0 - sig)};
}

// ---------------------------------------------------------------------------
// MICNN: forward recursion carrying z, dz/dK and d2z/dKdK (packed) per layer.

void micnn_batch(const MicnnWeights& w, std::size_t n, const double* kin, double* value,
                 double* gradient, double* hessian, InnerScratch& s, std::size_t* visits,
                 bool derivs) {
  const std::size_t m = w.inputs;
  const std::size_t np = packed_size(m);
  std::size_t width = m;
  for (const MicnnLayer& l : w.layers) width = std::max({width, l.out, l.in});

  double* z_buf[2] = {s.take(0, width * n), s.take(1, width * n)};
  double* dz_buf[2] = {nullptr, nullptr};
  double* d2z_buf[2] = {nullptr, nullptr};
  if (derivs) {
    dz_buf[0] = s.take(2, width * m * n);
    dz_buf[1] = s.take(3, width * m * n);
    d2z_buf[0] = s.take(4, width * np * n);
    d2z_buf[1] = s.take(5, width * np * n);
  }

  const double* z = kin;  // z^(0) = K; its derivatives are the identity
  const double* dz = nullptr;
  const double* d2z = nullptr;
  int cur = 0;

  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const MicnnLayer& layer = w.layers[li];
    const bool last = li + 1 == w.layers.size();
    const bool first = li == 0;
    double* y = z_buf[cur];
    double* dy = dz_buf[cur];
    double* d2y = d2z_buf[cur];

    for (std::size_t j = 0; j < layer.out; ++j) {
      double* yj = y + j * n;
      std::fill(yj, yj + n, 0.0);
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double a = layer.a[j * layer.in + i];
        const double* zi = z + i * n;
        for (std::size_t p = 0; p < n; ++p) yj[p] += a * zi[p];
      }
      for (std::size_t q = 0; q < m; ++q) {
        const double b = layer.b[j * m + q];
        const double* kq = kin + q * n;
        for (std::size_t p = 0; p < n; ++p) yj[p] += b * kq[p];
      }
      if (!last) {
        const double c = layer.c[j];
        for (std::size_t p = 0; p < n; ++p) yj[p] += c;
      }
    }

    if (derivs) {
      for (std::size_t j = 0; j < layer.out; ++j) {
        for (std::size_t q = 0; q < m; ++q) {
          double* dyjq = dy + (j * m + q) * n;
          if (first) {
            const double g = layer.a[j * layer.in + q] + layer.b[j * m + q];
            std::fill(dyjq, dyjq + n, g);
            continue;
          }
          std::fill(dyjq, dyjq + n, 0.0);
          for (std::size_t i = 0; i < layer.in; ++i) {
            const double a = layer.a[j * layer.in + i];
            const double* dziq = dz + (i * m + q) * n;
            for (std::size_t p = 0; p < n; ++p) dyjq[p] += a * dziq[p];
          }
          const double b = layer.b[j * m + q];
          for (std::size_t p = 0; p < n; ++p) dyjq[p] += b;
        }
        for (std::size_t r = 0; r < np; ++r) {
          double* d2 = d2y + (j * np + r) * n;
          std::fill(d2, d2 + n, 0.0);
          if (first) continue;
          for (std::size_t i = 0; i < layer.in; ++i) {
            const double a = layer.a[j * layer.in + i];
            const double* src = d2z + (i * np + r) * n;
            for (std::size_t p = 0; p < n; ++p) d2[p] += a * src[p];
          }
        }
      }
    }

    if (!last) {
      for (std::size_t j = 0; j < layer.out; ++j) {
        double* yj = y + j * n;
        for (std::size_t p = 0; p < n; ++p) {
          const Softplus act = softplus(yj[p]);
          yj[p] = act.value;
          if (!derivs) continue;
          double* dyj = dy + j * m * n;
          double* d2yj = d2y + j * np * n;
          std::size_t r = 0;
          for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a; b < m; ++b, ++r)
              d2yj[r * n + p] = act.d1 * d2yj[r * n + p] +
                                act.d2 * dyj[a * n + p] * dyj[b * n + p];
          for (std::size_t a = 0; a < m; ++a) dyj[a * n + p] *= act.d1;
        }
      }
    }

    if (visits) ++*visits;
    z = y;
    dz = dy;
    d2z = d2y;
    cur ^= 1;
  }

  std::copy(z, z + n, value);
  if (derivs) {
    std::copy(dz, dz + m * n, gradient);
    unpack_hessian(m, n, d2z, hessian);
  }
}

// ---------------------------------------------------------------------------
// CANN: independent branches, diagonal Hessian.

struct Scalar3 {
  double f, d1, d2;
};

inline Scalar3 cann_f0(CannF0 kind, double x) {
  switch (kind) {
    case CannF0::Identity: return {x, 1.0, 0.0};
    case CannF0::Macaulay: return {x > 0.0 ? x : 0.0, x > 0.0 ? 1.0 : 0.0, 0.0};
    case CannF0::Abs: return {std::abs(x), x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0), 0.0};
  }
  return {0, 0, 0};
}

inline Scalar3 cann_f1(int power, double x) {
  switch (power) {
    case 1: return {x, 1.0, 0.0};
    case 2: return {x * x, 2.0 * x, 2.0};
    default: return {x * x * x, 3.0 * x * x, 6.0 * x};
  }
}

inline Scalar3 cann_f2(CannF2 kind, double w1, double x, std::size_t point) {
  switch (kind) {
    case CannF2::Linear: return {w1 * x, w1, 0.0};
    case CannF2::Exp: {
      const double e = std::exp(w1 * x);
      return {e - 1.0, w1 * e, w1 * w1 * e};
    }
    case CannF2::Log: {
      const double arg = 1.0 - w1 * x;
      if (!(arg > 0.0))
        throw PointError(point, "CANN log branch evaluated outside its domain (1 - w1 x = " +
                                    std::to_string(arg) + ")");
      return {-std::log(arg), w1 / arg, w1 * w1 / (arg * arg)};
    }
  }
  return {0, 0, 0};
}

void cann_batch(const CannWeights& w, std::size_t n, const double* kin, double* value,
                double* gradient, double* hessian, bool derivs) {
  const std::size_t m = w.inputs;
  std::fill(value, value + n, 0.0);
  if (derivs) {
    std::fill(gradient, gradient + m * n, 0.0);
    std::fill(hessian, hessian + m * m * n, 0.0);
  }
  for (const CannBranch& br : w.branches) {
    const double* k = kin + br.input * n;
    double* g = derivs ? gradient + br.input * n : nullptr;
    double* h = derivs ? hessian + (br.input * m + br.input) * n : nullptr;
    for (std::size_t p = 0; p < n; ++p) {
      const Scalar3 s0 = cann_f0(br.f0, k[p] - br.w0);
      const Scalar3 s1 = cann_f1(br.power, s0.f);
      const Scalar3 s2 = cann_f2(br.f2, br.w1, s1.f, p);
      value[p] += br.w2 * s2.f;
      if (!derivs) continue;
      g[p] += br.w2 * s2.d1 * s1.d1 * s0.d1;
      h[p] += br.w2 * ((s2.d2 * s1.d1 * s1.d1 + s2.d1 * s1.d2) * s0.d1 * s0.d1 +
                       s2.d1 * s1.d1 * s0.d2);
    }
  }
}

// ---------------------------------------------------------------------------
// ICKAN: layers of weighted B-splines sharing one uniform knot vector.

struct BasisAt {
  int first;  // first nonzero basis index
  double dx;  // distance beyond the range (0 inside)
  double n0[kMaxSplineOrder + 1];
  double n1[kMaxSplineOrder + 1];
  double n2[kMaxSplineOrder + 1];
};

// Cox-de Boor triangle restricted to the nonzero functions at x, plus the
// derivative recurrence (derivative of an order-k spline is an order-(k-1)
// spline over the same knots).
void basis_at(const IckanWeights& w, double x, BasisAt& out) {
  const int k = w.order;
  const double* t = w.knots.data();
  const double h = t[1] - t[0];
  double xe = x;
  out.dx = 0.0;
  if (x < w.x_min) {
    xe = w.x_min;
    out.dx = x - w.x_min;
  } else if (x > w.x_max) {
    xe = w.x_max;
    out.dx = x - w.x_max;
  }
  int span = k + static_cast<int>(std::floor((xe - t[k]) / h));
  span = std::clamp(span, k, w.n_basis - 1);
  out.first = span - k;

  double tri[kMaxSplineOrder + 1][kMaxSplineOrder + 1];
  tri[0][0] = 1.0;
  for (int j = 1; j <= k; ++j) {
    const double inv = 1.0 / (j * h);
    for (int r = 0; r <= j; ++r) {
      const int i = span - j + r;
      const double left = r >= 1 ? tri[j - 1][r - 1] : 0.0;
      const double right = r <= j - 1 ? tri[j - 1][r] : 0.0;
      tri[j][r] = (xe - t[i]) * inv * left + (t[i + j + 1] - xe) * inv * right;
    }
  }
  const double inv_h = 1.0 / h;
  for (int r = 0; r <= k; ++r) {
    out.n0[r] = tri[k][r];
    out.n1[r] = 0.0;
    out.n2[r] = 0.0;
  }
  if (k >= 1) {
    for (int r = 0; r <= k; ++r) {
      const double left = r >= 1 ? tri[k - 1][r - 1] : 0.0;
      const double right = r <= k - 1 ? tri[k - 1][r] : 0.0;
      out.n1[r] = (left - right) * inv_h;
    }
  }
  if (k >= 2) {
    double d[kMaxSplineOrder + 1];
    for (int r = 0; r <= k - 1; ++r) {
      const double left = r >= 1 ? tri[k - 2][r - 1] : 0.0;
      const double right = r <= k - 2 ? tri[k - 2][r] : 0.0;
      d[r] = (left - right) * inv_h;
    }
    for (int r = 0; r <= k; ++r) {
      const double left = r >= 1 ? d[r - 1] : 0.0;
      const double right = r <= k - 1 ? d[r] : 0.0;
      out.n2[r] = (left - right) * inv_h;
    }
  }
}

struct SplineValue {
  double f, d1, d2;
};

inline SplineValue spline_eval(const IckanWeights& w, const BasisAt& b,
                               const std::vector<double>& c) {
  double f = 0.0, d1 = 0.0, d2 = 0.0;
  for (int r = 0; r <= w.order; ++r) {
    const double cr = c[b.first + r];
    f += cr * b.n0[r];
    d1 += cr * b.n1[r];
    d2 += cr * b.n2[r];
  }
  if (b.dx != 0.0) {
    if (w.extrapolation == SplineExtrapolation::Linear) return {f + b.dx * d1, d1, 0.0};
    return {f, 0.0, 0.0};
  }
  return {f, d1, d2};
}

void ickan_batch(const IckanWeights& w, std::size_t n, const double* kin, double* value,
                 double* gradient, double* hessian, InnerScratch& s, std::size_t* visits,
                 bool derivs) {
  const std::size_t m = w.inputs();
  const std::size_t np = packed_size(m);
  std::size_t width = m;
  for (const IckanLayer& l : w.layers) width = std::max({width, l.out, l.in});

  double* z_buf[2] = {s.take(0, width * n), s.take(1, width * n)};
  double* dz_buf[2] = {nullptr, nullptr};
  double* d2z_buf[2] = {nullptr, nullptr};
  if (derivs) {
    dz_buf[0] = s.take(2, width * m * n);
    dz_buf[1] = s.take(3, width * m * n);
    d2z_buf[0] = s.take(4, width * np * n);
    d2z_buf[1] = s.take(5, width * np * n);
  }

  const double* z = kin;
  const double* dz = nullptr;
  const double* d2z = nullptr;
  int cur = 0;
  BasisAt basis;

  for (std::size_t li = 0; li < w.layers.size(); ++li) {
    const IckanLayer& layer = w.layers[li];
    const bool first = li == 0;
    double* zo = z_buf[cur];
    double* dzo = dz_buf[cur];
    double* d2zo = d2z_buf[cur];
    std::fill(zo, zo + layer.out * n, 0.0);
    if (derivs) {
      std::fill(dzo, dzo + layer.out * m * n, 0.0);
      std::fill(d2zo, d2zo + layer.out * np * n, 0.0);
    }

    for (std::size_t j = 0; j < layer.in; ++j) {
      for (std::size_t p = 0; p < n; ++p) {
        basis_at(w, z[j * n + p], basis);
        for (std::size_t i = 0; i < layer.out; ++i) {
          const IckanEdge& edge = layer.edges[i * layer.in + j];
          const SplineValue sv = spline_eval(w, basis, edge.control);
          zo[i * n + p] += edge.weight * sv.f;
          if (!derivs) continue;
          const double s1 = edge.weight * sv.d1;
          const double s2 = edge.weight * sv.d2;
          if (first) {
            // dz_j/dK_a = delta_ja, d2z_j = 0
            dzo[(i * m + j) * n + p] += s1;
            d2zo[(i * np + packed_index(m, j, j)) * n + p] += s2;
            continue;
          }
          std::size_t r = 0;
          for (std::size_t a = 0; a < m; ++a) {
            const double dja = dz[(j * m + a) * n + p];
            for (std::size_t b = a; b < m; ++b, ++r)
              d2zo[(i * np + r) * n + p] +=
                  s2 * dja * dz[(j * m + b) * n + p] + s1 * d2z[(j * np + r) * n + p];
          }
          for (std::size_t a = 0; a < m; ++a)
            dzo[(i * m + a) * n + p] += s1 * dz[(j * m + a) * n + p];
        }
      }
    }
    if (visits) ++*visits;
    z = zo;
    dz = dzo;
    d2z = d2zo;
    cur ^= 1;
  }

  std::copy(z, z + n, value);
  if (derivs) {
    std::copy(dz, dz + m * n, gradient);
    unpack_hessian(m, n, d2z, hessian);
  }
}

// ---------------------------------------------------------------------------

void gent_thomas_batch(std::size_t n, const double* kin, double* value, double* gradient,
                       double* hessian, bool derivs) {
  const double* i1 = kin;
  const double* i2 = kin + n;
  const double* jac = kin + 2 * n;
  for (std::size_t p = 0; p < n; ++p) {
    if (!(i2[p] > 0.0)) throw PointError(p, "Gent-Thomas energy needs I2bar > 0");
    const double jm1 = jac[p] - 1.0;
    value[p] = 0.5 * (i1[p] - 3.0) + std::log(i2[p] / 3.0) + jm1 * jm1;
    if (!derivs) continue;
    gradient[p] = 0.5;
    gradient[n + p] = 1.0 / i2[p];
    gradient[2 * n + p] = 2.0 * jm1;
    for (std::size_t r = 0; r < 9; ++r) hessian[r * n + p] = 0.0;
    hessian[4 * n + p] = -1.0 / (i2[p] * i2[p]);
    hessian[8 * n + p] = 2.0;
  }
}

void dispatch(const InnerNetwork& net, std::size_t n, const double* k, double* value,
              double* gradient, double* hessian, InnerScratch& s, std::size_t* visits,
              bool derivs) {
  std::visit(Overloaded{
                 [&](const MicnnWeights& w) {
                   micnn_batch(w, n, k, value, gradient, hessian, s, visits, derivs);
                 },
                 [&](const CannWeights& w) {
                   cann_batch(w, n, k, value, gradient, hessian, derivs);
                   if (visits) ++*visits;
                 },
                 [&](const IckanWeights& w) {
                   ickan_batch(w, n, k, value, gradient, hessian, s, visits, derivs);
                 },
                 [&](const GentThomasInner&) {
                   gent_thomas_batch(n, k, value, gradient, hessian, derivs);
                   if (visits) ++*visits;
                 },
             },
             net);
}

InnerEval single(const InnerNetwork& net, std::span<const double> k, std::size_t* visits) {
  const std::size_t m = input_width(net);
  if (k.size() != m)
    throw ValidationError("inner network expects " + std::to_string(m) + " inputs, got " +
                          std::to_string(k.size()));
  InnerEval out;
  out.gradient.resize(m);
  out.hessian.resize(m * m);
  InnerScratch scratch;
  dispatch(net, 1, k.data(), &out.value, out.gradient.data(), out.hessian.data(), scratch,
           visits, true);
  return out;
}

}  // namespace

// --- Validation ----------------------------------------------------------------

void MicnnWeights::validate() const {
  if (inputs == 0) throw ValidationError("inputs: zero network inputs");
  if (layers.empty()) throw ValidationError("layers: no output layer");
  std::size_t prev = inputs;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const MicnnLayer& l = layers[k];
    const std::string at = "layers[" + std::to_string(k) + "]";
    const bool last = k + 1 == layers.size();
    if (l.in != prev)
      throw ValidationError(at + ": input width " + std::to_string(l.in) + ", expected " +
                            std::to_string(prev));
    if (last && l.out != 1) throw ValidationError(at + ": output layer must be scalar");
    if (l.a.size() != l.out * l.in) throw ValidationError(at + ".A: wrong shape");
    if (l.b.size() != l.out * inputs) throw ValidationError(at + ".B: wrong shape");
    if (!last && l.c.size() != l.out) throw ValidationError(at + ".c: wrong length");
    if (last && !l.c.empty()) throw ValidationError(at + ".c: output layer has no bias");
    for (std::size_t r = 0; r < l.out; ++r) {
      for (std::size_t c = 0; c < l.in; ++c) {
        const double v = l.a[r * l.in + c];
        const std::string where = at + ".A[" + std::to_string(r) + "][" + std::to_string(c) + "]";
        require_finite(v, where);
        if (v < 0.0)
          throw ValidationError(where + ": negative entry " + std::to_string(v) +
                                " in non-negative matrix");
      }
      for (std::size_t c = 0; c < inputs; ++c) {
        const double v = l.b[r * inputs + c];
        const std::string where = at + ".B[" + std::to_string(r) + "][" + std::to_string(c) + "]";
        require_finite(v, where);
        if (monotone && v < 0.0)
          throw ValidationError(where + ": negative entry " + std::to_string(v) +
                                " in non-negative matrix (monotone mode)");
      }
    }
    for (std::size_t r = 0; r < l.c.size(); ++r)
      require_finite(l.c[r], at + ".c[" + std::to_string(r) + "]");
    prev = l.out;
  }
}

void CannWeights::validate() const {
  if (inputs == 0) throw ValidationError("inputs: zero network inputs");
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const CannBranch& b = branches[k];
    const std::string at = "branches[" + std::to_string(k) + "]";
    if (b.input >= inputs) throw ValidationError(at + ".input: out of range");
    if (b.power < 1 || b.power > 3) throw ValidationError(at + ".f1: power must be 1, 2 or 3");
    require_finite(b.w0, at + ".w0");
    require_finite(b.w1, at + ".w1");
    require_finite(b.w2, at + ".w2");
    if (b.w2 < 0.0) throw ValidationError(at + ".w2: negative weight");
    if (b.f2 != CannF2::Linear && b.w1 < 0.0)
      throw ValidationError(at + ".w1: negative weight on a convex branch");
  }
}

void IckanWeights::make_uniform_knots() {
  const int count = order + n_basis + 1;
  const double h = (x_max - x_min) / (n_basis - order);
  knots.resize(count);
  for (int i = 0; i < count; ++i) knots[i] = x_min + (i - order) * h;
}

void IckanWeights::validate() const {
  if (order < 1 || order > kMaxSplineOrder)
    throw ValidationError("spline.order: must be in [1, " + std::to_string(kMaxSplineOrder) + "]");
  if (n_basis < order + 1) throw ValidationError("spline.n_basis: too few for the spline order");
  if (!(x_max > x_min)) throw ValidationError("spline.range: empty input range");
  const std::size_t count = static_cast<std::size_t>(order + n_basis + 1);
  if (knots.size() != count)
    throw ValidationError("spline.knots: expected " + std::to_string(count) + " knots, got " +
                          std::to_string(knots.size()));
  const double h = knots[1] - knots[0];
  if (!(h > 0.0)) throw ValidationError("spline.knots: not increasing");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (std::abs((knots[i] - knots[i - 1]) - h) > 1e-9 * h)
      throw ValidationError("spline.knots: not uniform at index " + std::to_string(i));
  }
  if (std::abs(knots[order] - x_min) > 1e-9 * h || std::abs(knots[n_basis] - x_max) > 1e-9 * h)
    throw ValidationError("spline.knots: inconsistent with the input range");
  if (layers.empty()) throw ValidationError("layers: empty");
  std::size_t prev = layers.front().in;
  if (prev == 0) throw ValidationError("layers[0]: zero inputs");
  for (std::size_t r = 0; r < layers.size(); ++r) {
    const IckanLayer& l = layers[r];
    const std::string at = "layers[" + std::to_string(r) + "]";
    if (l.in != prev) throw ValidationError(at + ": input width does not chain");
    if (r + 1 == layers.size() && l.out != 1)
      throw ValidationError(at + ": last layer must be scalar");
    if (l.edges.size() != l.in * l.out) throw ValidationError(at + ".edges: wrong count");
    for (std::size_t e = 0; e < l.edges.size(); ++e) {
      const IckanEdge& edge = l.edges[e];
      const std::string ea = at + ".edges[" + std::to_string(e) + "]";
      require_finite(edge.weight, ea + ".w");
      if (edge.weight < 0.0) throw ValidationError(ea + ".w: negative spline weight");
      if (edge.control.size() != static_cast<std::size_t>(n_basis))
        throw ValidationError(ea + ".c: expected " + std::to_string(n_basis) + " control points");
      for (std::size_t i = 0; i < edge.control.size(); ++i)
        require_finite(edge.control[i], ea + ".c[" + std::to_string(i) + "]");
      constexpr double tol = 1e-12;
      for (std::size_t i = 0; i + 1 < edge.control.size(); ++i) {
        const double d0 = edge.control[i + 1] - edge.control[i];
        if (d0 < -tol)
          throw ValidationError(ea + ".c[" + std::to_string(i + 1) + "]: control points decrease");
        if (i + 2 < edge.control.size() && edge.control[i + 2] - edge.control[i + 1] < d0 - tol)
          throw ValidationError(ea + ".c[" + std::to_string(i + 2) +
                                "]: control points are not convex");
      }
    }
    prev = l.out;
  }
}

SplineBasis bspline_basis(const IckanWeights& w, double x) {
  BasisAt b;
  basis_at(w, x, b);
  SplineBasis out;
  out.first = b.first;
  out.value.assign(b.n0, b.n0 + w.order + 1);
  out.d1.assign(b.n1, b.n1 + w.order + 1);
  out.d2.assign(b.n2, b.n2 + w.order + 1);
  return out;
}

std::size_t input_width(const InnerNetwork& net) {
  return std::visit(Overloaded{
                        [](const MicnnWeights& w) { return w.inputs; },
                        [](const CannWeights& w) { return w.inputs; },
                        [](const IckanWeights& w) { return w.inputs(); },
                        [](const GentThomasInner& w) { return w.inputs(); },
                    },
                    net);
}

void validate(const InnerNetwork& net) {
  std::visit(Overloaded{
                 [](const MicnnWeights& w) { w.validate(); },
                 [](const CannWeights& w) { w.validate(); },
                 [](const IckanWeights& w) { w.validate(); },
                 [](const GentThomasInner&) {},
             },
             net);
}

double* InnerScratch::take(int slot, std::size_t size) {
  std::vector<double>& v = buf[slot];
  if (v.size() < size) v.resize(size);
  return v.data();
}

std::size_t InnerScratch::bytes() const {
  std::size_t total = 0;
  for (const auto& v : buf) total += v.capacity() * sizeof(double);
  return total;
}

void inner_eval_batch(const InnerNetwork& net, std::size_t n, const double* k, double* value,
                      double* gradient, double* hessian, InnerScratch& scratch,
                      std::size_t* layer_visits) {
  dispatch(net, n, k, value, gradient, hessian, scratch, layer_visits, true);
}

void inner_value_batch(const InnerNetwork& net, std::size_t n, const double* k, double* value,
                       InnerScratch& scratch) {
  dispatch(net, n, k, value, nullptr, nullptr, scratch, nullptr, false);
}

InnerEval inner_eval(const InnerNetwork& net, std::span<const double> k) {
  return single(net, k, nullptr);
}

InnerEval micnn_eval(const MicnnWeights& w, std::span<const double> k, std::size_t* visits) {
  return single(InnerNetwork{w}, k, visits);
}

InnerEval cann_eval(const CannWeights& w, std::span<const double> k) {
  return single(InnerNetwork{w}, k, nullptr);
}

InnerEval ickan_eval(const IckanWeights& w, std::span<const double> k) {
  return single(InnerNetwork{w}, k, nullptr);
}

InnerEval gent_thomas_inner_eval(std::span<const double> k) {
  return single(InnerNetwork{GentThomasInner{}}, k, nullptr);
}

double inner_value(const InnerNetwork& net, std::span<const double> k) {
  if (k.size() != input_width(net)) throw ValidationError("inner network: input width mismatch");
  InnerScratch scratch;
  double v = 0.0;
  inner_value_batch(net, 1, k.data(), &v, scratch);
  return v;
}

InnerEval fd_oracle(const std::function<double(std::span<const double>)>& f,
                    std::span<const double> k, FdSteps steps) {
  const std::size_t m = k.size();
  std::vector<double> x(k.begin(), k.end());
  InnerEval out;
  out.value = f(x);
  out.gradient.assign(m, 0.0);
  out.hessian.assign(m * m, 0.0);
  auto step = [&](double rel, std::size_t a) { return rel * std::max(1.0, std::abs(k[a])); };
  auto at = [&](std::size_t a, double da, std::size_t b, double db) {
    x[a] += da;
    x[b] += db;
    const double v = f(x);
    x[a] = k[a];
    x[b] = k[b];
    return v;
  };
  for (std::size_t a = 0; a < m; ++a) {
    const double h = step(steps.gradient, a);
    out.gradient[a] = (at(a, h, a, 0.0) - at(a, -h, a, 0.0)) / (2.0 * h);
  }
  for (std::size_t a = 0; a < m; ++a) {
    const double ha = step(steps.hessian, a);
    out.hessian[a * m + a] =
        (at(a, ha, a, 0.0) - 2.0 * out.value + at(a, -ha, a, 0.0)) / (ha * ha);
    for (std::size_t b = a + 1; b < m; ++b) {
      const double hb = step(steps.hessian, b);
      const double v = (at(a, ha, b, hb) - at(a, ha, b, -hb) - at(a, -ha, b, hb) +
                        at(a, -ha, b, -hb)) /
                       (4.0 * ha * hb);
      out.hessian[a * m + b] = out.hessian[b * m + a] = v;
    }
  }
  return out;
}

}  // namespace ncmfe
