#pragma once

// Kinematic layer: invariants of C = F^T F (standard or isochoric), together
// with their push-forward derivative tensors
//
//   G^m  = F (dK_m/dC) F^T                       (SymTensor3)
//   GG^m = d2K_m/dC_IJ dC_KL F_iI F_jJ F_kK F_lL (Stiffness3)
//
// which the constitutive layer contracts with the inner network derivatives.

#include <string>
#include <string_view>
#include <vector>

#include "ncmfe/tensors.hpp"

namespace ncmfe {

enum class KinematicVariant { Standard, IsochoricPlusJ };

enum class InvariantKind { I1, I2, I3, J, I4, I5 };

struct InvariantSpec {
  InvariantKind kind = InvariantKind::I1;
  // Structural-vector pair for I4/I5; ignored otherwise.
  int i = 0;
  int j = 0;

  friend bool operator==(const InvariantSpec&, const InvariantSpec&) = default;
};

/// "I1", "I2", "I3", "J", "I4[0,0]", "I5[0,1]".
std::string to_string(const InvariantSpec& s);
InvariantSpec parse_invariant(std::string_view text);

std::string to_string(KinematicVariant v);
KinematicVariant parse_variant(std::string_view text);

struct KinematicConfig {
  KinematicVariant variant = KinematicVariant::Standard;
  std::vector<InvariantSpec> invariants;
  std::vector<Vec3> structural_vectors;

  std::size_t size() const { return invariants.size(); }

  /// Throws ValidationError: empty invariant list, I3 in the isochoric
  /// variant, out-of-range structural-vector index, non-unit vector.
  void validate() const;

  /// {I1, I2, I3}.
  static KinematicConfig standard();
  /// {I1bar, I2bar, J}.
  static KinematicConfig isochoric();
  /// Adds I4[i,i] (and I5[i,i] when `with_i5`) for every structural vector;
  /// cross pairs are added only when `cross_pairs` is set.
  KinematicConfig& with_fibres(bool with_i5, bool cross_pairs = false);
};

struct KinematicEval {
  std::vector<double> values;
  std::vector<SymTensor3> g;
  std::vector<Stiffness3> gg;
};

/// Inputs with det F at or below this are rejected.
inline constexpr double kMinDetF = 1e-12;

KinematicEval eval_standard(const Mat3& f, const KinematicConfig& cfg);
KinematicEval eval_isochoric(const Mat3& f, const KinematicConfig& cfg);
/// Dispatches on cfg.variant.
KinematicEval eval_kinematics(const Mat3& f, const KinematicConfig& cfg);

/// Raw kernels used by the batch path. `values` has cfg.size() slots, `g`
/// 6*size, `gg` 36*size. Throws DomainError for det F <= kMinDetF.
void eval_kinematics(const KinematicConfig& cfg, const Mat3& f, double* values, double* g,
                     double* gg);
/// Values only; identical arithmetic to the full kernel for the values.
void eval_kinematic_values(const KinematicConfig& cfg, const Mat3& f, double* values);

// --- Benchmark loading paths -----------------------------------------------

enum class LoadingPath { UT, UC, BT, BC, SS, PS };

inline constexpr LoadingPath kAllPaths[] = {LoadingPath::UT, LoadingPath::UC, LoadingPath::BT,
                                            LoadingPath::BC, LoadingPath::SS, LoadingPath::PS};

std::string to_string(LoadingPath p);
LoadingPath parse_loading_path(std::string_view text);

/// Deformation gradient of the path at amplitude gamma. Throws DomainError
/// when gamma <= -1 on the stretch paths.
Mat3 loading_path(LoadingPath path, double gamma);

}  // namespace ncmfe
