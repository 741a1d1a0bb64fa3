#pragma once

// Inner networks N(K): scalar strain energy from the kinematic scalars, with
// value, gradient and Hessian produced in a single forward traversal.
//
// Every architecture exposes a batch kernel over a structure-of-arrays block
// of points (input a of point p at K[a*n + p]). Per-point arithmetic does
// not depend on n, so a block of one point reproduces the batch bit for bit.

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace ncmfe {

struct InnerEval {
  double value = 0.0;
  std::vector<double> gradient;  // m
  std::vector<double> hessian;   // m x m, row-major
};

// --- MICNN -------------------------------------------------------------------

struct MicnnLayer {
  std::size_t out = 0;
  std::size_t in = 0;     // width of z^(k-1)
  std::vector<double> a;  // out x in, row-major
  std::vector<double> b;  // out x inputs (skip connection from K)
  std::vector<double> c;  // out; empty on the output layer
};

/// Monotone input-convex network with softplus activation. The last entry of
/// `layers` is the scalar output layer (no bias); the others are hidden.
struct MicnnWeights {
  std::size_t inputs = 0;
  bool monotone = true;
  std::vector<MicnnLayer> layers;

  std::size_t hidden_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
  /// Throws ValidationError: shape mismatch, negative A entry, negative B
  /// entry in monotone mode, non-finite values.
  void validate() const;
};

// --- CANN --------------------------------------------------------------------

enum class CannF0 { Identity, Macaulay, Abs };
enum class CannF2 { Linear, Exp, Log };

/// One branch w2 * f2(f1(f0(K_input - w0)); w1).
struct CannBranch {
  std::size_t input = 0;
  CannF0 f0 = CannF0::Identity;
  int power = 1;  // f1 = (.)^power, power in {1, 2, 3}
  CannF2 f2 = CannF2::Linear;
  double w0 = 0.0;
  double w1 = 1.0;
  double w2 = 0.0;
};

struct CannWeights {
  std::size_t inputs = 0;
  std::vector<CannBranch> branches;

  /// Throws ValidationError: bad input index or power, non-finite weight,
  /// negative w2, negative w1 on the exp/log branches.
  void validate() const;
};

// --- ICKAN -------------------------------------------------------------------

enum class SplineExtrapolation { Linear, Clamp };

struct IckanEdge {
  double weight = 0.0;          // w_s >= 0
  std::vector<double> control;  // n_basis control points
};

struct IckanLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<IckanEdge> edges;  // out x in, edge (i, j) at i*in + j
};

struct IckanWeights {
  int order = 3;
  int n_basis = 8;
  double x_min = -1.0;
  double x_max = 4.0;
  SplineExtrapolation extrapolation = SplineExtrapolation::Linear;
  /// Shared knot vector, order + n_basis + 1 entries. Filled from the range
  /// by make_uniform_knots() when absent.
  std::vector<double> knots;
  std::vector<IckanLayer> layers;

  std::size_t inputs() const { return layers.empty() ? 0 : layers.front().in; }
  void make_uniform_knots();
  /// Throws ValidationError: malformed knots (count, non-uniform, range),
  /// layer chaining, negative w_s, control points violating
  /// c[i+2] - c[i+1] >= c[i+1] - c[i] >= 0.
  void validate() const;
};

/// Single-point B-spline basis of the given order over a uniform knot vector:
/// values and first/second derivatives of the order+1 nonzero functions.
struct SplineBasis {
  int first = 0;  // index of the first nonzero basis function
  std::vector<double> value, d1, d2;
};
SplineBasis bspline_basis(const IckanWeights& w, double x);

// --- Analytic reference ------------------------------------------------------

/// 0.5 (I1bar - 3) + log(I2bar / 3) + (J - 1)^2 on inputs (I1bar, I2bar, J).
struct GentThomasInner {
  std::size_t inputs() const { return 3; }
};

using InnerNetwork = std::variant<MicnnWeights, CannWeights, IckanWeights, GentThomasInner>;

std::size_t input_width(const InnerNetwork& net);
void validate(const InnerNetwork& net);

/// Growable work buffers for the batch kernels; reused across calls.
struct InnerScratch {
  std::vector<double> buf[8];
  double* take(int slot, std::size_t size);
  std::size_t bytes() const;
};

/// Values, gradients (m x n SoA) and Hessians (m x m x n SoA) for a block
/// of n points. `layer_visits`, when set, is incremented once per
/// layer traversed.
void inner_eval_batch(const InnerNetwork& net, std::size_t n, const double* k, double* value,
                      double* gradient, double* hessian, InnerScratch& scratch,
                      std::size_t* layer_visits = nullptr);
/// Values only.
void inner_value_batch(const InnerNetwork& net, std::size_t n, const double* k, double* value,
                       InnerScratch& scratch);

InnerEval inner_eval(const InnerNetwork& net, std::span<const double> k);
InnerEval micnn_eval(const MicnnWeights& w, std::span<const double> k,
                     std::size_t* layer_visits = nullptr);
InnerEval cann_eval(const CannWeights& w, std::span<const double> k);
InnerEval ickan_eval(const IckanWeights& w, std::span<const double> k);
InnerEval gent_thomas_inner_eval(std::span<const double> k);
double inner_value(const InnerNetwork& net, std::span<const double> k);

// --- Finite-difference oracle -----------------------------------------------

struct FdSteps {
  double gradient = 1e-6;  // relative
  double hessian = 1e-4;   // relative
};

/// Central-difference gradient and Hessian of `f` at `k`, with per-entry
/// steps h * max(1, |k_a|). Costs O(m^2) evaluations of f.
InnerEval fd_oracle(const std::function<double(std::span<const double>)>& f,
                    std::span<const double> k, FdSteps steps = {});

}  // namespace ncmfe
