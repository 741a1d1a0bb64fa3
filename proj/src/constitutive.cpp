#include "ncmfe/constitutive.hpp"

#include <algorithm>
#include <cmath>

#include "ncmfe/errors.hpp"

namespace ncmfe {

namespace {

// Points per FD chunk; each expands to kFdEvaluationsPerPoint perturbed F.
constexpr std::size_t kFdChunk = 32;

struct FdStencil {
  // Offsets (component, sign) pairs; second entry unused for single shifts.
  int a, sa, b, sb;
};

// Stencil list in evaluation order: centre, gradient pairs, Hessian
// diagonal pairs, then the four corners of every off-diagonal pair.
std::vector<FdStencil> make_fd_stencils() {
  std::vector<FdStencil> s;
  s.push_back({0, 0, 0, 0});
  for (int a = 0; a < 9; ++a) {
    s.push_back({a, +1, 0, 0});
    s.push_back({a, -1, 0, 0});
  }
  for (int a = 0; a < 9; ++a) {
    s.push_back({a, +2, 0, 0});
    s.push_back({a, -2, 0, 0});
  }
  for (int a = 0; a < 9; ++a)
    for (int b = a + 1; b < 9; ++b) {
      s.push_back({a, +2, b, +2});
      s.push_back({a, +2, b, -2});
      s.push_back({a, -2, b, +2});
      s.push_back({a, -2, b, -2});
    }
  return s;
}

const std::vector<FdStencil>& fd_stencils() {
  static const std::vector<FdStencil> s = make_fd_stencils();
  static_assert(kFdEvaluationsPerPoint == 181);
  return s;
}

// Sign codes: +-1 use the gradient step, +-2 the Hessian step.
double fd_shift(int code, double hg, double hh) {
  switch (code) {
    case 1: return hg;
    case -1: return -hg;
    case 2: return hh;
    case -2: return -hh;
    default: return 0.0;
  }
}

// First Piola P and dP/dF from the FD samples of one point, mapped to
// tau_ij = P_iJ F_jJ and c_ijkl = F_jJ A_iJkL F_lL - delta_ik tau_jl.
void fd_push_forward(const double* f, const double* psi, double* tau_out, double* c_out) {
  const FdSteps steps;
  double hg[9], hh[9];
  for (int a = 0; a < 9; ++a) {
    const double scale = std::max(1.0, std::abs(f[a]));
    hg[a] = steps.gradient * scale;
    hh[a] = steps.hessian * scale;
  }
  double p[9];
  double amat[81];
  std::size_t k = 1;
  for (int a = 0; a < 9; ++a, k += 2) p[a] = (psi[k] - psi[k + 1]) / (2.0 * hg[a]);
  for (int a = 0; a < 9; ++a, k += 2)
    amat[a * 9 + a] = (psi[k] - 2.0 * psi[0] + psi[k + 1]) / (hh[a] * hh[a]);
  for (int a = 0; a < 9; ++a)
    for (int b = a + 1; b < 9; ++b, k += 4)
      amat[a * 9 + b] = amat[b * 9 + a] =
          (psi[k] - psi[k + 1] - psi[k + 2] + psi[k + 3]) / (4.0 * hh[a] * hh[b]);

  double tau[9];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int jj = 0; jj < 3; ++jj) s += p[3 * i + jj] * f[3 * j + jj];
      tau[3 * i + j] = s;
    }
  auto cfull = [&](int i, int j, int kk, int l) {
    double s = 0.0;
    for (int jj = 0; jj < 3; ++jj)
      for (int ll = 0; ll < 3; ++ll)
        s += f[3 * j + jj] * amat[(3 * i + jj) * 9 + (3 * kk + ll)] * f[3 * l + ll];
    return s - (i == kk ? tau[3 * j + l] : 0.0);
  };
  for (int a = 0; a < 6; ++a) {
    const int i = kVoigtPairs[a][0], j = kVoigtPairs[a][1];
    tau_out[a] = 0.5 * (tau[3 * i + j] + tau[3 * j + i]);
    for (int b = 0; b < 6; ++b) {
      const int kk = kVoigtPairs[b][0], l = kVoigtPairs[b][1];
      c_out[6 * a + b] =
          0.25 * (cfull(i, j, kk, l) + cfull(j, i, kk, l) + cfull(i, j, l, kk) + cfull(j, i, l, kk));
    }
  }
}

Mat3 load_f(const double* f) {
  Mat3 m;
  std::copy(f, f + 9, m.v.begin());
  return m;
}

void eval_cgo(const NcmDefinition& model, std::size_t n, const double* f, double* psi,
              double* tau, double* c, double* k, double* g, double* gg, double* dn, double* d2n,
              InnerScratch& scratch) {
  const std::size_t m = model.kinematics.size();
  double values[16];
  for (std::size_t p = 0; p < n; ++p) {
    try {
      eval_kinematics(model.kinematics, load_f(f + 9 * p), values, g + 6 * m * p,
                      gg + 36 * m * p);
    } catch (const DomainError& e) {
      throw PointError(p, e.what());
    }
    for (std::size_t a = 0; a < m; ++a) k[a * n + p] = values[a];
  }
  inner_eval_batch(model.network, n, k, psi, dn, d2n, scratch);
  double d[16], d2[256];
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t a = 0; a < m; ++a) d[a] = dn[a * n + p];
    for (std::size_t r = 0; r < m * m; ++r) d2[r] = d2n[r * n + p];
    push_forward_stress(m, d, g + 6 * m * p, tau + 6 * p);
    push_forward_stiffness(m, d, d2, g + 6 * m * p, gg + 36 * m * p, c + 36 * p);
  }
}

void eval_fd(const NcmDefinition& model, std::size_t n, const double* f, double* psi,
             double* tau, double* c, double* fd_f, double* fd_k, double* fd_psi,
             InnerScratch& scratch) {
  const std::size_t m = model.kinematics.size();
  const std::vector<FdStencil>& st = fd_stencils();
  const std::size_t ns = st.size();
  const FdSteps steps;
  double values[16];
  for (std::size_t start = 0; start < n; start += kFdChunk) {
    const std::size_t count = std::min(kFdChunk, n - start);
    const std::size_t total = count * ns;
    for (std::size_t q = 0; q < count; ++q) {
      const double* f0 = f + 9 * (start + q);
      for (std::size_t s = 0; s < ns; ++s) {
        double* fp = fd_f + 9 * (q * ns + s);
        std::copy(f0, f0 + 9, fp);
        const FdStencil& e = st[s];
        if (e.sa != 0) {
          const double scale = std::max(1.0, std::abs(f0[e.a]));
          fp[e.a] += fd_shift(e.sa, steps.gradient * scale, steps.hessian * scale);
        }
        if (e.sb != 0) {
          const double scale = std::max(1.0, std::abs(f0[e.b]));
          fp[e.b] += fd_shift(e.sb, steps.gradient * scale, steps.hessian * scale);
        }
      }
    }
    for (std::size_t r = 0; r < total; ++r) {
      try {
        eval_kinematic_values(model.kinematics, load_f(fd_f + 9 * r), values);
      } catch (const DomainError& e) {
        throw PointError(start + r / ns, e.what());
      }
      for (std::size_t a = 0; a < m; ++a) fd_k[a * total + r] = values[a];
    }
    try {
      inner_value_batch(model.network, total, fd_k, fd_psi, scratch);
    } catch (const PointError& e) {
      throw PointError(start + e.index() / ns, e.what());
    }
    for (std::size_t q = 0; q < count; ++q) {
      const std::size_t p = start + q;
      psi[p] = fd_psi[q * ns];
      fd_push_forward(f + 9 * p, fd_psi + q * ns, tau + 6 * p, c + 36 * p);
    }
  }
}

}  // namespace

std::string to_string(DerivativeMode m) { return m == DerivativeMode::CGO ? "cgo" : "fd"; }

DerivativeMode parse_derivative_mode(std::string_view text) {
  if (text == "cgo") return DerivativeMode::CGO;
  if (text == "fd") return DerivativeMode::FD;
  throw ValidationError("unknown derivative mode '" + std::string(text) + "'");
}

std::string NcmDefinition::architecture() const {
  return std::visit(
      [](const auto& w) -> std::string {
        using T = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<T, MicnnWeights>) return "micnn";
        else if constexpr (std::is_same_v<T, CannWeights>) return "cann";
        else if constexpr (std::is_same_v<T, IckanWeights>) return "ickan";
        else return "gent_thomas";
      },
      network);
}

void NcmDefinition::validate() const {
  kinematics.validate();
  if (kinematics.size() > 16) throw ValidationError("kinematic: more than 16 invariants");
  ncmfe::validate(network);
  if (input_width(network) != kinematics.size())
    throw ValidationError("network input width " + std::to_string(input_width(network)) +
                          " does not match the " + std::to_string(kinematics.size()) +
                          " kinematic invariants");
}

NcmDefinition gent_thomas_model() {
  NcmDefinition m;
  m.name = "gent_thomas";
  m.kinematics = KinematicConfig::isochoric();
  m.network = GentThomasInner{};
  return m;
}

void MaterialBatch::reserve(std::size_t capacity, std::size_t max_inputs) {
  capacity = std::max<std::size_t>(capacity, 1);
  max_inputs = std::max(max_inputs, max_inputs_);
  if (capacity <= capacity_ && max_inputs <= max_inputs_) return;
  capacity = std::max(capacity, capacity_);
  capacity_ = capacity;
  max_inputs_ = max_inputs;
  f_.resize(9 * capacity);
  psi_.resize(capacity);
  tau_.resize(6 * capacity);
  c_.resize(36 * capacity);
  k_.resize(max_inputs * capacity);
  g_.resize(6 * max_inputs * capacity);
  gg_.resize(36 * max_inputs * capacity);
  dn_.resize(max_inputs * capacity);
  d2n_.resize(max_inputs * max_inputs * capacity);
  const std::size_t fd_points = std::min(capacity, kFdChunk) * kFdEvaluationsPerPoint;
  fd_f_.resize(9 * fd_points);
  fd_k_.resize(max_inputs * fd_points);
  fd_psi_.resize(fd_points);
}

void MaterialBatch::set_size(std::size_t n) {
  if (n > capacity_)
    throw ValidationError("batch size " + std::to_string(n) + " exceeds capacity " +
                          std::to_string(capacity_));
  n_ = n;
}

void MaterialBatch::set_f(std::size_t p, const Mat3& m) {
  std::copy(m.v.begin(), m.v.end(), f_.begin() + 9 * p);
}

Mat3 MaterialBatch::get_f(std::size_t p) const { return load_f(f(p)); }

PointResult MaterialBatch::result(std::size_t p) const {
  PointResult r;
  r.psi = psi_[p];
  std::copy(tau(p), tau(p) + 6, r.tau.v.begin());
  std::copy(c(p), c(p) + 36, r.c.v.begin());
  return r;
}

std::size_t MaterialBatch::bytes() const {
  std::size_t total = 0;
  for (const auto* v : {&f_, &psi_, &tau_, &c_, &k_, &g_, &gg_, &dn_, &d2n_, &fd_f_, &fd_k_,
                        &fd_psi_})
    total += v->capacity() * sizeof(double);
  return total + inner_.bytes();
}

void eval_batch(const NcmDefinition& model, MaterialBatch& batch) {
  const std::size_t n = batch.n_;
  if (n == 0) return;
  const std::size_t m = model.kinematics.size();
  if (m > batch.max_inputs_)
    throw ValidationError("batch reserved for " + std::to_string(batch.max_inputs_) +
                          " invariants, model has " + std::to_string(m));
  if (model.mode == DerivativeMode::CGO)
    eval_cgo(model, n, batch.f_.data(), batch.psi_.data(), batch.tau_.data(), batch.c_.data(),
             batch.k_.data(), batch.g_.data(), batch.gg_.data(), batch.dn_.data(),
             batch.d2n_.data(), batch.inner_);
  else
    eval_fd(model, n, batch.f_.data(), batch.psi_.data(), batch.tau_.data(), batch.c_.data(),
            batch.fd_f_.data(), batch.fd_k_.data(), batch.fd_psi_.data(), batch.inner_);
}

PointResult eval_point(const NcmDefinition& model, const Mat3& f) {
  MaterialBatch batch(1, model.kinematics.size());
  batch.set_size(1);
  batch.set_f(0, f);
  try {
    eval_batch(model, batch);
  } catch (const PointError& e) {
    throw DomainError(e.what());
  }
  return batch.result(0);
}

PointResult eval_gent_thomas(const Mat3& f) {
  static const NcmDefinition model = gent_thomas_model();
  return eval_point(model, f);
}

std::vector<PathSample> path_scan(const NcmDefinition& model, LoadingPath path,
                                  double gamma_max, int steps) {
  if (steps < 1) throw ValidationError("path scan needs at least one step");
  const int rows = gamma_max == 0.0 ? 1 : steps + 1;
  MaterialBatch batch(rows, model.kinematics.size());
  batch.set_size(rows);
  std::vector<PathSample> out(rows);
  for (int k = 0; k < rows; ++k) {
    out[k].gamma = gamma_max * k / steps;
    batch.set_f(k, loading_path(path, out[k].gamma));
  }
  NcmDefinition cgo = model;
  cgo.mode = DerivativeMode::CGO;
  eval_batch(cgo, batch);
  for (int k = 0; k < rows; ++k) out[k].psi = batch.psi(k);
  return out;
}

Mat3 random_deformation(std::mt19937_64& rng, double scale, double min_det) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Mat3 f = Mat3::identity();
    for (double& x : f.v) x += scale * normal(rng);
    if (det(f) > min_det) return f;
  }
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double q[4];
  double len = 0.0;
  do {
    len = 0.0;
    for (double& x : q) {
      x = normal(rng);
      len += x * x;
    }
  } while (len < 1e-12);
  len = std::sqrt(len);
  for (double& x : q) x /= len;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return Mat3{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
               2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
               2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
}

}  // namespace ncmfe
