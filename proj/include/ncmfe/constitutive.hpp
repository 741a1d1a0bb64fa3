#pragma once

// Strain energy Psi = N(K(F)) with Kirchhoff stress and spatial stiffness,
// evaluated one point at a time or over a contiguous MaterialBatch.

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncmfe/inner_networks.hpp"
#include "ncmfe/kinematics.hpp"
#include "ncmfe/tensors.hpp"

namespace ncmfe {

enum class DerivativeMode { CGO, FD };

std::string to_string(DerivativeMode m);
DerivativeMode parse_derivative_mode(std::string_view text);

/// Optional comparison of a fitted model against the analytic reference,
/// carried by weight files produced offline.
struct ReferenceFit {
  std::string reference = "gent_thomas";
  double gamma_max = 0.5;
  int steps = 10;
  /// Max |Psi_model(F) - Psi_model(I) - Psi_ref(F)| over every loading path and sample.
  double tolerance = 0.0;
};

struct NcmDefinition {
  std::string name;
  KinematicConfig kinematics;
  InnerNetwork network;
  DerivativeMode mode = DerivativeMode::CGO;
  std::optional<ReferenceFit> reference_fit;

  /// "micnn", "cann", "ickan" or "gent_thomas".
  std::string architecture() const;
  /// Throws ValidationError: kinematic config invalid, inner weights invalid,
  /// or kinematic output width != network input width.
  void validate() const;
};

/// Gent-Thomas reference: isochoric kinematics with the analytic inner
/// function 0.5 (I1bar - 3) + log(I2bar / 3) + (J - 1)^2.
NcmDefinition gent_thomas_model();

struct PointResult {
  double psi = 0.0;
  SymTensor3 tau;
  Stiffness3 c;
};

/// Tables for a contiguous run of material points. F is point-major (9
/// scalars per point, row-major), psi has one slot per point, tau 6 and c 36
/// per point. All storage is sized once by reserve().
class MaterialBatch {
 public:
  MaterialBatch() = default;
  explicit MaterialBatch(std::size_t capacity, std::size_t max_inputs = 8) {
    reserve(capacity, max_inputs);
  }

  /// Grows every table (and the work buffers for width m) to hold `capacity`
  /// points. Never called by eval_batch.
  void reserve(std::size_t capacity, std::size_t max_inputs = 8);
  std::size_t capacity() const { return capacity_; }

  /// Number of active points; must not exceed capacity().
  void set_size(std::size_t n);
  std::size_t size() const { return n_; }

  double* f(std::size_t p) { return f_.data() + 9 * p; }
  const double* f(std::size_t p) const { return f_.data() + 9 * p; }
  void set_f(std::size_t p, const Mat3& m);
  Mat3 get_f(std::size_t p) const;

  double psi(std::size_t p) const { return psi_[p]; }
  const double* tau(std::size_t p) const { return tau_.data() + 6 * p; }
  const double* c(std::size_t p) const { return c_.data() + 36 * p; }
  PointResult result(std::size_t p) const;

  const double* f_data() const { return f_.data(); }
  const double* psi_data() const { return psi_.data(); }
  const double* tau_data() const { return tau_.data(); }
  const double* c_data() const { return c_.data(); }

  /// Bytes held by tables and work buffers.
  std::size_t bytes() const;

 private:
  friend void eval_batch(const NcmDefinition& model, MaterialBatch& batch);

  std::size_t capacity_ = 0;
  std::size_t max_inputs_ = 0;
  std::size_t n_ = 0;
  std::vector<double> f_, psi_, tau_, c_;
  // Work tables: invariants (SoA), G and GG (point-major), inner gradient
  // and Hessian (SoA).
  std::vector<double> k_, g_, gg_, dn_, d2n_;
  std::vector<double> fd_f_, fd_k_, fd_psi_;
  InnerScratch inner_;
};

/// Fills psi/tau/c for points [0, size()). Results equal a loop of
/// eval_point calls in index order, bit for bit. Throws PointError carrying
/// the offending point index.
void eval_batch(const NcmDefinition& model, MaterialBatch& batch);

/// Throws DomainError (kinematic or inner-network domain violation).
PointResult eval_point(const NcmDefinition& model, const Mat3& f);

PointResult eval_gent_thomas(const Mat3& f);

/// Number of strain-energy evaluations the FD mode performs per point.
inline constexpr std::size_t kFdEvaluationsPerPoint = 1 + 2 * 9 + 2 * 9 + 4 * 36;

struct PathSample {
  double gamma = 0.0;
  double psi = 0.0;
};

/// Psi along a loading path at gamma_k = gamma_max k / steps, k = 0..steps.
/// A zero amplitude yields a single row. Throws DomainError when the path is
/// undefined at some gamma, ValidationError when steps < 1.
std::vector<PathSample> path_scan(const NcmDefinition& model, LoadingPath path,
                                  double gamma_max, int steps);

/// F = I + scale G with standard-normal G, redrawn until det F > min_det.
Mat3 random_deformation(std::mt19937_64& rng, double scale = 0.2, double min_det = 0.2);
/// Uniformly distributed rotation.
Mat3 random_rotation(std::mt19937_64& rng);

}  // namespace ncmfe
