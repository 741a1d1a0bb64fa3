#pragma once

// Hex8 meshes, the quadrature cache, boundary conditions, the CSR stiffness
// pattern, and the four assembly algorithms (traditional, globally
// vectorized, batch vectorized, partitioned).
//
// Assembly uses the updated-Lagrangian form over the reference volume with
// Kirchhoff stress:
//
//   r^I_i    = sum_{e,q} w tau_ij g^I_j
//   K^IJ_ij  = sum_{e,q} w g^I_k (delta_ij tau_kl + c_ikjl) g^J_l
//
// where g^I = F^{-T} Grad phi^I is the spatial shape gradient at the qp.

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ncmfe/constitutive.hpp"

namespace ncmfe {

inline constexpr int kNodesPerElement = 8;
inline constexpr int kQuadPoints = 8;
inline constexpr int kElementDofs = 24;

struct Mesh {
  std::vector<Vec3> nodes;
  /// Node order: bottom face (z- in the reference element) counterclockwise,
  /// then the top face in the same order.
  std::vector<std::array<int, 8>> elements;
  std::map<std::string, std::vector<int>> nodesets;
  std::map<std::string, std::vector<std::array<int, 4>>> facetsets;

  std::size_t n_nodes() const { return nodes.size(); }
  std::size_t n_elements() const { return elements.size(); }
  std::size_t n_dofs() const { return 3 * nodes.size(); }
  /// Throws ValidationError: index out of range in connectivity or sets.
  void validate() const;
};

/// Unit cube [0,1]^3 split into n^3 hex8 elements, with nodesets and
/// facetsets x0, x1, y0, y1, z0, z1 on its faces.
Mesh build_structured_cube(int n);

/// Text format: `nodes N`, N coordinate rows, `elements E`, E rows of 8
/// indices, then optional `nodeset NAME K` (K indices) and
/// `facetset NAME K` (K rows of 4 indices) blocks. `#` starts a comment.
Mesh read_mesh(std::istream& in);
Mesh load_mesh(const std::string& path);
void write_mesh(std::ostream& out, const Mesh& mesh);

/// Trilinear shape functions and their derivatives on [-1,1]^3.
std::array<double, 8> hex8_shape(const Vec3& xi);
std::array<Vec3, 8> hex8_shape_gradients(const Vec3& xi);
/// 2x2x2 Gauss points and weights.
const std::array<Vec3, 8>& gauss_points();

struct QuadCache {
  std::size_t n_elements = 0;
  /// Reference shape gradients, index ((e*8 + q)*8 + I)*3 + k.
  std::vector<double> grad;
  /// Gauss weight times det(dX/dxi), index e*8 + q.
  std::vector<double> weight;

  const double* gradients(std::size_t e, int q) const { return grad.data() + (e * 8 + q) * 24; }
  double volume() const;
};

/// Throws ValidationError naming (element, qp) on a non-positive Jacobian.
QuadCache build_quad_cache(const Mesh& mesh);

/// F = I + sum_I u^I (x) Grad phi^I at (e, q).
Mat3 compute_trial_f(const std::vector<double>& u, const Mesh& mesh, const QuadCache& cache,
                     std::size_t e, int q);

// --- Boundary conditions ---------------------------------------------------

/// One prescribed DOF. `value(lambda)` is the displacement at load factor
/// lambda in [0, 1].
struct DirichletDof {
  std::size_t dof = 0;
  std::function<double(double)> value;
};

/// Dead-load traction t on a reference facet set, scaled by lambda.
struct Traction {
  std::string facetset;
  Vec3 t{};
};

struct DofMap {
  std::size_t n_dofs = 0;
  std::vector<DirichletDof> dirichlet;  // sorted by dof, unique
  std::vector<char> constrained;        // n_dofs flags
  std::vector<Traction> tractions;

  static std::size_t dof(int node, int dir) { return 3 * static_cast<std::size_t>(node) + dir; }
  /// Sorts constraints, rejects duplicates and out-of-range DOFs.
  void finalize();
  std::size_t n_free() const;
};

struct FeModel {
  Mesh mesh;
  QuadCache cache;
  DofMap dofs;
};

/// Builds the cache and DOF map for a mesh (no constraints yet).
FeModel make_fe_model(Mesh mesh);

/// Fixes every direction of the nodes in `nodeset`.
void fix_nodeset(FeModel& fe, const std::string& nodeset, int dir = -1);
/// Prescribes a displacement `value * lambda` in direction `dir`.
void displace_nodeset(FeModel& fe, const std::string& nodeset, int dir, double value);
/// Rotation by angle*lambda about the axis parallel to z through
/// (cx, cy), plus axial displacement axial*lambda along z.
void twist_nodeset(FeModel& fe, const std::string& nodeset, double cx, double cy, double angle,
                   double axial);

/// The twist cube: unit cube with n subdivisions fixed at z = 0, the z = 1
/// face rotated by half a turn about the cube axis and pulled by one unit.
FeModel make_twist_cube(int n);

/// Boundary-condition file, one directive per line:
///   fix NODESET [x|y|z|all]
///   displace NODESET x|y|z VALUE
///   twist NODESET CX CY ANGLE AXIAL
///   traction FACETSET TX TY TZ
void apply_boundary_file(FeModel& fe, std::istream& in);

// --- Sparse matrix ---------------------------------------------------------

struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }
  /// y = A x.
  void multiply(const double* x, double* y) const;
  double diagonal(std::size_t i) const;
  /// Entry (i, j) or 0 outside the pattern.
  double at(std::size_t i, std::size_t j) const;
};

/// Pattern from node adjacency (3x3 blocks) plus the slot of every element
/// matrix entry, index e*576 + a*24 + b.
struct SparsityPattern {
  CsrMatrix matrix;
  std::vector<std::size_t> element_slots;
};
SparsityPattern build_pattern(const Mesh& mesh);

// --- Assembly --------------------------------------------------------------

enum class AssemblyMode { Traditional, Global, Batch, Partitioned };
std::string to_string(AssemblyMode m);
/// "trad", "global", "batch", "partitioned".
AssemblyMode parse_assembly_mode(std::string_view text);

struct AssemblyStats {
  double constitutive_seconds = 0.0;
  double total_seconds = 0.0;
  double max_trace_c = 0.0;
  std::size_t active_workers = 1;
};

/// Element accumulation for one quadrature point: the local stiffness and
/// residual contributions above, with the Voigt shear entries of c expanded
/// to the full index form.
void accumulate_qp(const double* grad_ref, double weight, const Mat3& f, const double* tau,
                   const double* c, double* ke, double* re);

/// Owns the pattern and reusable batches; assemble() may be called any
/// number of times (one per Newton iteration).
class Assembler {
 public:
  Assembler(const NcmDefinition& model, const FeModel& fe, AssemblyMode mode,
            std::size_t n_batch = 1024, std::size_t n_workers = 1);
  ~Assembler();
  Assembler(const Assembler&) = delete;
  Assembler& operator=(const Assembler&) = delete;

  /// Fills K (full, unconstrained) and r = f_int - lambda f_ext at u.
  /// Throws AssemblyError naming element and qp (and worker when
  /// partitioned).
  void assemble(const std::vector<double>& u, double lambda, CsrMatrix& k,
                std::vector<double>& r, AssemblyStats* stats = nullptr);

  /// Residual only (no tangent); same arithmetic as assemble() for r.
  void residual(const std::vector<double>& u, double lambda, std::vector<double>& r);

  const SparsityPattern& pattern() const { return pattern_; }
  std::size_t workspace_bytes() const;

 private:
  struct Worker;
  NcmDefinition model_;
  const FeModel& fe_;
  AssemblyMode mode_;
  std::size_t n_batch_;
  std::size_t n_workers_;
  SparsityPattern pattern_;
  std::vector<std::unique_ptr<Worker>> workers_;
  // Facet quadrature for tractions: (dof, weight) pairs per traction.
  std::vector<std::vector<std::pair<std::size_t, double>>> traction_loads_;

  // Scatter targets for the current call.
  CsrMatrix* target_k_ = nullptr;
  std::vector<double>* target_r_ = nullptr;

  void run(const std::vector<double>& u, double lambda, CsrMatrix* k, std::vector<double>& r,
           bool tangent, AssemblyStats* stats);
  void run_worker(Worker& w, const std::vector<double>& u, bool tangent);
  void scatter(std::size_t e, const double* ke, const double* re);
  void merge(const std::vector<double>& u, double lambda, CsrMatrix* k, std::vector<double>& r,
             bool tangent);
};

/// One-shot wrappers; equal bit for bit for the same inputs.
void assemble_traditional(const NcmDefinition& model, const FeModel& fe,
                          const std::vector<double>& u, CsrMatrix& k, std::vector<double>& r);
void assemble_global_vectorized(const NcmDefinition& model, const FeModel& fe,
                                const std::vector<double>& u, CsrMatrix& k,
                                std::vector<double>& r);
void assemble_batch_vectorized(const NcmDefinition& model, const FeModel& fe,
                               const std::vector<double>& u, std::size_t n_batch, CsrMatrix& k,
                               std::vector<double>& r);
void assemble_partitioned(const NcmDefinition& model, const FeModel& fe,
                          const std::vector<double>& u, std::size_t n_batch,
                          std::size_t n_workers, CsrMatrix& k, std::vector<double>& r);

}  // namespace ncmfe
