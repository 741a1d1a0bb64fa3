#include "ncmfe/fe_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "ncmfe/errors.hpp"

namespace ncmfe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::array<Vec3, 8> kCorners{{{-1, -1, -1},
                                        {1, -1, -1},
                                        {1, 1, -1},
                                        {-1, 1, -1},
                                        {-1, -1, 1},
                                        {1, -1, 1},
                                        {1, 1, 1},
                                        {-1, 1, 1}}};

double trace_c(const Mat3& f) {
  double s = 0.0;
  for (double x : f.v) s += x * x;
  return s;
}

}  // namespace

// --- Mesh --------------------------------------------------------------------

void Mesh::validate() const {
  const int nn = static_cast<int>(nodes.size());
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (int a = 0; a < 8; ++a)
      if (elements[e][a] < 0 || elements[e][a] >= nn)
        throw ValidationError("elements[" + std::to_string(e) + "]: node index " +
                              std::to_string(elements[e][a]) + " out of range");
  for (const auto& [name, ids] : nodesets)
    for (int id : ids)
      if (id < 0 || id >= nn)
        throw ValidationError("nodeset " + name + ": node index " + std::to_string(id) +
                              " out of range");
  for (const auto& [name, facets] : facetsets)
    for (const auto& f : facets)
      for (int id : f)
        if (id < 0 || id >= nn)
          throw ValidationError("facetset " + name + ": node index " + std::to_string(id) +
                                " out of range");
}

Mesh build_structured_cube(int n) {
  if (n < 1) throw ValidationError("cube subdivisions must be at least 1");
  Mesh m;
  const int np = n + 1;
  auto id = [np](int i, int j, int k) { return i + np * (j + np * k); };
  m.nodes.resize(static_cast<std::size_t>(np) * np * np);
  for (int k = 0; k < np; ++k)
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < np; ++i)
        m.nodes[id(i, j, k)] = {static_cast<double>(i) / n, static_cast<double>(j) / n,
                                static_cast<double>(k) / n};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        m.elements.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k),
                              id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1),
                              id(i, j + 1, k + 1)});
  // Faces: axis a at level 0 or n, spanned by the other two axes.
  for (int axis = 0; axis < 3; ++axis)
    for (int side = 0; side < 2; ++side) {
      const std::string name = std::string(1, "xyz"[axis]) + (side ? "1" : "0");
      const int level = side ? n : 0;
      auto node = [&](int s, int t) {
        int c[3];
        c[axis] = level;
        c[(axis + 1) % 3] = s;
        c[(axis + 2) % 3] = t;
        return id(c[0], c[1], c[2]);
      };
      std::vector<int>& ns = m.nodesets[name];
      for (int t = 0; t < np; ++t)
        for (int s = 0; s < np; ++s) ns.push_back(node(s, t));
      std::sort(ns.begin(), ns.end());
      auto& fs = m.facetsets[name];
      for (int t = 0; t < n; ++t)
        for (int s = 0; s < n; ++s)
          fs.push_back({node(s, t), node(s + 1, t), node(s + 1, t + 1), node(s, t + 1)});
    }
  return m;
}

namespace {

// Token reader that skips `#` comments and tracks line numbers.
class Tokens {
 public:
  explicit Tokens(std::istream& in) : in_(in) {}

  bool next(std::string& tok) {
    for (;;) {
      if (ls_ >> tok) {
        if (tok[0] == '#') {
          ls_.setstate(std::ios::eofbit);
          continue;
        }
        return true;
      }
      std::string line;
      if (!std::getline(in_, line)) return false;
      ++line_;
      ls_.clear();
      ls_.str(line);
    }
  }

  std::string expect(const char* what) {
    std::string tok;
    if (!next(tok)) fail(std::string("unexpected end of file, expected ") + what);
    return tok;
  }

  template <class T>
  T number(const char* what) {
    const std::string tok = expect(what);
    std::istringstream ss(tok);
    T v{};
    if (!(ss >> v) || !ss.eof()) fail("expected " + std::string(what) + ", got '" + tok + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("mesh line " + std::to_string(line_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::istringstream ls_;
  int line_ = 0;
};

}  // namespace

Mesh read_mesh(std::istream& in) {
  Tokens t(in);
  Mesh m;
  if (t.expect("'nodes'") != "nodes") t.fail("expected 'nodes'");
  const long nn = t.number<long>("node count");
  if (nn < 1) t.fail("node count must be positive");
  m.nodes.resize(nn);
  for (long i = 0; i < nn; ++i)
    for (int d = 0; d < 3; ++d) m.nodes[i][d] = t.number<double>("coordinate");
  if (t.expect("'elements'") != "elements") t.fail("expected 'elements'");
  const long ne = t.number<long>("element count");
  if (ne < 0) t.fail("element count must be non-negative");
  m.elements.resize(ne);
  for (long e = 0; e < ne; ++e)
    for (int a = 0; a < 8; ++a) m.elements[e][a] = t.number<int>("node index");
  std::string tok;
  while (t.next(tok)) {
    if (tok == "nodeset") {
      const std::string name = t.expect("set name");
      const long k = t.number<long>("set size");
      auto& ids = m.nodesets[name];
      for (long i = 0; i < k; ++i) ids.push_back(t.number<int>("node index"));
    } else if (tok == "facetset") {
      const std::string name = t.expect("set name");
      const long k = t.number<long>("set size");
      auto& fs = m.facetsets[name];
      for (long i = 0; i < k; ++i) {
        std::array<int, 4> f{};
        for (int& x : f) x = t.number<int>("node index");
        fs.push_back(f);
      }
    } else {
      t.fail("unknown block '" + tok + "'");
    }
  }
  m.validate();
  return m;
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open mesh file");
  try {
    return read_mesh(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_mesh(std::ostream& out, const Mesh& m) {
  out.precision(17);
  out << "nodes " << m.nodes.size() << "\n";
  for (const Vec3& x : m.nodes) out << x[0] << " " << x[1] << " " << x[2] << "\n";
  out << "elements " << m.elements.size() << "\n";
  for (const auto& e : m.elements) {
    for (int a = 0; a < 8; ++a) out << (a ? " " : "") << e[a];
    out << "\n";
  }
  for (const auto& [name, ids] : m.nodesets) {
    out << "nodeset " << name << " " << ids.size() << "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ((i + 1) % 16 == 0 || i + 1 == ids.size() ? "\n" : " ");
  }
  for (const auto& [name, fs] : m.facetsets) {
    out << "facetset " << name << " " << fs.size() << "\n";
    for (const auto& f : fs) out << f[0] << " " << f[1] << " " << f[2] << " " << f[3] << "\n";
  }
}

// --- Shape functions and quadrature -------------------------------------------

std::array<double, 8> hex8_shape(const Vec3& xi) {
  std::array<double, 8> n{};
  for (int a = 0; a < 8; ++a)
    n[a] = 0.125 * (1 + kCorners[a][0] * xi[0]) * (1 + kCorners[a][1] * xi[1]) *
           (1 + kCorners[a][2] * xi[2]);
  return n;
}

std::array<Vec3, 8> hex8_shape_gradients(const Vec3& xi) {
  std::array<Vec3, 8> g{};
  for (int a = 0; a < 8; ++a) {
    const double sx = kCorners[a][0], sy = kCorners[a][1], sz = kCorners[a][2];
    g[a] = {0.125 * sx * (1 + sy * xi[1]) * (1 + sz * xi[2]),
            0.125 * sy * (1 + sx * xi[0]) * (1 + sz * xi[2]),
            0.125 * sz * (1 + sx * xi[0]) * (1 + sy * xi[1])};
  }
  return g;
}

const std::array<Vec3, 8>& gauss_points() {
  static const std::array<Vec3, 8> pts = [] {
    const double g = 1.0 / std::sqrt(3.0);
    std::array<Vec3, 8> p{};
    for (int a = 0; a < 8; ++a) p[a] = {g * kCorners[a][0], g * kCorners[a][1], g * kCorners[a][2]};
    return p;
  }();
  return pts;
}

double QuadCache::volume() const {
  double v = 0.0;
  for (double w : weight) v += w;
  return v;
}

QuadCache build_quad_cache(const Mesh& mesh) {
  QuadCache c;
  c.n_elements = mesh.n_elements();
  c.grad.resize(c.n_elements * 8 * 24);
  c.weight.resize(c.n_elements * 8);
  const auto& gp = gauss_points();
  for (std::size_t e = 0; e < c.n_elements; ++e) {
    for (int q = 0; q < 8; ++q) {
      const std::array<Vec3, 8> dn = hex8_shape_gradients(gp[q]);
      Mat3 jac;  // dX_i / dxi_k
      for (int a = 0; a < 8; ++a) {
        const Vec3& x = mesh.nodes[mesh.elements[e][a]];
        for (int i = 0; i < 3; ++i)
          for (int k = 0; k < 3; ++k) jac(i, k) += x[i] * dn[a][k];
      }
      const double dj = det(jac);
      if (!(dj > 0.0))
        throw ValidationError("element " + std::to_string(e) + ", qp " + std::to_string(q) +
                              ": non-positive reference Jacobian " + std::to_string(dj));
      const Mat3 inv = inverse(jac);
      double* g = c.grad.data() + (e * 8 + q) * 24;
      // Grad phi = J^{-T} dphi/dxi
      for (int a = 0; a < 8; ++a)
        for (int i = 0; i < 3; ++i) {
          double s = 0.0;
          for (int k = 0; k < 3; ++k) s += inv(k, i) * dn[a][k];
          g[3 * a + i] = s;
        }
      c.weight[e * 8 + q] = dj;  // unit Gauss weights for the 2-point rule
    }
  }
  return c;
}

namespace {

Mat3 trial_f(const double* u, const std::array<int, 8>& nodes, const double* grad) {
  Mat3 f = Mat3::identity();
  for (int a = 0; a < 8; ++a) {
    const double* ua = u + 3 * static_cast<std::size_t>(nodes[a]);
    const double* ga = grad + 3 * a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f(i, j) += ua[i] * ga[j];
  }
  return f;
}

}  // namespace

Mat3 compute_trial_f(const std::vector<double>& u, const Mesh& mesh, const QuadCache& cache,
                     std::size_t e, int q) {
  if (u.size() != mesh.n_dofs()) throw ValidationError("displacement vector has wrong length");
  return trial_f(u.data(), mesh.elements[e], cache.gradients(e, q));
}

// --- Boundary conditions ---------------------------------------------------

void DofMap::finalize() {
  std::stable_sort(dirichlet.begin(), dirichlet.end(),
                   [](const DirichletDof& a, const DirichletDof& b) { return a.dof < b.dof; });
  constrained.assign(n_dofs, 0);
  for (std::size_t i = 0; i < dirichlet.size(); ++i) {
    if (dirichlet[i].dof >= n_dofs) throw ValidationError("constrained DOF out of range");
    if (i > 0 && dirichlet[i].dof == dirichlet[i - 1].dof)
      throw ValidationError("DOF " + std::to_string(dirichlet[i].dof) + " is constrained twice");
    constrained[dirichlet[i].dof] = 1;
  }
}

std::size_t DofMap::n_free() const { return n_dofs - dirichlet.size(); }

FeModel make_fe_model(Mesh mesh) {
  mesh.validate();
  FeModel fe;
  fe.cache = build_quad_cache(mesh);
  fe.dofs.n_dofs = mesh.n_dofs();
  fe.mesh = std::move(mesh);
  fe.dofs.finalize();
  return fe;
}

namespace {

const std::vector<int>& nodeset_of(const FeModel& fe, const std::string& name) {
  auto it = fe.mesh.nodesets.find(name);
  if (it == fe.mesh.nodesets.end()) throw ValidationError("unknown nodeset '" + name + "'");
  return it->second;
}

}  // namespace

void fix_nodeset(FeModel& fe, const std::string& nodeset, int dir) {
  for (int node : nodeset_of(fe, nodeset))
    for (int d = 0; d < 3; ++d)
      if (dir < 0 || dir == d) fe.dofs.dirichlet.push_back({DofMap::dof(node, d), [](double) { return 0.0; }});
  fe.dofs.finalize();
}

void displace_nodeset(FeModel& fe, const std::string& nodeset, int dir, double value) {
  for (int node : nodeset_of(fe, nodeset))
    fe.dofs.dirichlet.push_back({DofMap::dof(node, dir), [value](double l) { return value * l; }});
  fe.dofs.finalize();
}

void twist_nodeset(FeModel& fe, const std::string& nodeset, double cx, double cy, double angle,
                   double axial) {
  for (int node : nodeset_of(fe, nodeset)) {
    const Vec3 x = fe.mesh.nodes[node];
    const double rx = x[0] - cx, ry = x[1] - cy;
    fe.dofs.dirichlet.push_back({DofMap::dof(node, 0), [=](double l) {
                                   const double t = angle * l;
                                   return std::cos(t) * rx - std::sin(t) * ry - rx;
                                 }});
    fe.dofs.dirichlet.push_back({DofMap::dof(node, 1), [=](double l) {
                                   const double t = angle * l;
                                   return std::sin(t) * rx + std::cos(t) * ry - ry;
                                 }});
    fe.dofs.dirichlet.push_back({DofMap::dof(node, 2), [=](double l) { return axial * l; }});
  }
  fe.dofs.finalize();
}

FeModel make_twist_cube(int n) {
  FeModel fe = make_fe_model(build_structured_cube(n));
  fix_nodeset(fe, "z0");
  twist_nodeset(fe, "z1", 0.5, 0.5, M_PI, 1.0);
  return fe;
}

void apply_boundary_file(FeModel& fe, std::istream& in) {
  std::string line;
  int lineno = 0;
  auto direction = [&](const std::string& s) {
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    if (s == "all") return -1;
    throw ValidationError("boundary line " + std::to_string(lineno) + ": bad direction '" + s + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string cmd, set;
    if (!(ls >> cmd)) continue;
    const std::string where = "boundary line " + std::to_string(lineno) + ": ";
    if (!(ls >> set)) throw ValidationError(where + "missing set name");
    try {
      if (cmd == "fix") {
        std::string d = "all";
        ls >> d;
        fix_nodeset(fe, set, direction(d));
      } else if (cmd == "displace") {
        std::string d;
        double v;
        if (!(ls >> d >> v)) throw ValidationError("expected direction and value");
        const int dir = direction(d);
        if (dir < 0) throw ValidationError("displace needs a single direction");
        displace_nodeset(fe, set, dir, v);
      } else if (cmd == "twist") {
        double cx, cy, angle, axial;
        if (!(ls >> cx >> cy >> angle >> axial))
          throw ValidationError("expected CX CY ANGLE AXIAL");
        twist_nodeset(fe, set, cx, cy, angle, axial);
      } else if (cmd == "traction") {
        Traction t;
        t.facetset = set;
        if (!(ls >> t.t[0] >> t.t[1] >> t.t[2])) throw ValidationError("expected TX TY TZ");
        if (!fe.mesh.facetsets.count(set)) throw ValidationError("unknown facetset '" + set + "'");
        fe.dofs.tractions.push_back(t);
      } else {
        throw ValidationError("unknown directive '" + cmd + "'");
      }
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      if (msg.starts_with("boundary line")) throw;
      throw ValidationError(where + msg);
    }
  }
}

// --- CSR ---------------------------------------------------------------------

void CsrMatrix::multiply(const double* x, double* y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += val[p] * x[col[p]];
    y[i] = s;
  }
}

double CsrMatrix::diagonal(std::size_t i) const { return at(i, i); }

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  const auto b = col.begin() + row_ptr[i], e = col.begin() + row_ptr[i + 1];
  const auto it = std::lower_bound(b, e, j);
  return it != e && *it == j ? val[it - col.begin()] : 0.0;
}

SparsityPattern build_pattern(const Mesh& mesh) {
  const std::size_t nn = mesh.n_nodes();
  std::vector<std::vector<int>> adj(nn);
  for (const auto& el : mesh.elements)
    for (int a : el)
      for (int b : el) adj[a].push_back(b);
  for (auto& v : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  SparsityPattern p;
  CsrMatrix& m = p.matrix;
  m.n = 3 * nn;
  m.row_ptr.assign(m.n + 1, 0);
  for (std::size_t i = 0; i < nn; ++i)
    for (int d = 0; d < 3; ++d) m.row_ptr[3 * i + d + 1] = 3 * adj[i].size();
  for (std::size_t r = 0; r < m.n; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  m.col.resize(m.row_ptr.back());
  for (std::size_t i = 0; i < nn; ++i)
    for (int d = 0; d < 3; ++d) {
      std::size_t pos = m.row_ptr[3 * i + d];
      for (int j : adj[i])
        for (int dd = 0; dd < 3; ++dd) m.col[pos++] = 3 * static_cast<std::size_t>(j) + dd;
    }
  m.val.assign(m.col.size(), 0.0);

  p.element_slots.resize(mesh.n_elements() * 576);
  for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.elements[e];
    for (int a = 0; a < 8; ++a) {
      const auto& row_nodes = adj[el[a]];
      for (int b = 0; b < 8; ++b) {
        const std::size_t k =
            std::lower_bound(row_nodes.begin(), row_nodes.end(), el[b]) - row_nodes.begin();
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            p.element_slots[e * 576 + (3 * a + i) * 24 + 3 * b + j] =
                m.row_ptr[3 * static_cast<std::size_t>(el[a]) + i] + 3 * k + j;
      }
    }
  }
  return p;
}

// --- Assembly ------------------------------------------------------------------

std::string to_string(AssemblyMode m) {
  switch (m) {
    case AssemblyMode::Traditional: return "trad";
    case AssemblyMode::Global: return "global";
    case AssemblyMode::Batch: return "batch";
    case AssemblyMode::Partitioned: return "partitioned";
  }
  return "?";
}

AssemblyMode parse_assembly_mode(std::string_view text) {
  if (text == "trad" || text == "traditional") return AssemblyMode::Traditional;
  if (text == "global") return AssemblyMode::Global;
  if (text == "batch") return AssemblyMode::Batch;
  if (text == "partitioned") return AssemblyMode::Partitioned;
  throw ValidationError("unknown assembly mode '" + std::string(text) + "'");
}

void accumulate_qp(const double* grad_ref, double weight, const Mat3& f, const double* tau,
                   const double* c, double* ke, double* re) {
  const Mat3 finv = inverse(f);
  double g[8][3];
  for (int a = 0; a < 8; ++a)
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += finv(k, i) * grad_ref[3 * a + k];
      g[a][i] = s;
    }
  double t[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = tau[kVoigtIndex[i][j]];

  for (int a = 0; a < 8; ++a)
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int j = 0; j < 3; ++j) s += t[i][j] * g[a][j];
      re[3 * a + i] += weight * s;
    }
  if (ke == nullptr) return;

  Stiffness3 cs;
  std::copy(c, c + 36, cs.v.begin());
  const std::array<double, 81> cf = expand(cs);
  for (int a = 0; a < 8; ++a) {
    // ca[i][j][l] = g^a_k c_ikjl ; ta[l] = g^a_k tau_kl
    double ca[3][3][3];
    double ta[3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l) {
          double s = 0.0;
          for (int k = 0; k < 3; ++k) s += g[a][k] * cf[((i * 3 + k) * 3 + j) * 3 + l];
          ca[i][j][l] = s;
        }
    for (int l = 0; l < 3; ++l) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += g[a][k] * t[k][l];
      ta[l] = s;
    }
    for (int b = 0; b < 8; ++b) {
      const double geo = ta[0] * g[b][0] + ta[1] * g[b][1] + ta[2] * g[b][2];
      for (int i = 0; i < 3; ++i) {
        double* row = ke + (3 * a + i) * 24 + 3 * b;
        for (int j = 0; j < 3; ++j) {
          double s = ca[i][j][0] * g[b][0] + ca[i][j][1] * g[b][1] + ca[i][j][2] * g[b][2];
          if (i == j) s += geo;
          row[j] += weight * s;
        }
      }
    }
  }
}

struct Assembler::Worker {
  std::size_t id = 0;
  std::size_t e_begin = 0, e_end = 0;
  MaterialBatch batch;
  // Element matrices of this worker's range, used by the partitioned merge.
  std::vector<double> ke_store, re_store;
  double ke[576];
  double re[24];
  double constitutive_seconds = 0.0;
  double max_trace_c = 0.0;
  std::exception_ptr error;
};

Assembler::Assembler(const NcmDefinition& model, const FeModel& fe, AssemblyMode mode,
                     std::size_t n_batch, std::size_t n_workers)
    : model_(model), fe_(fe), mode_(mode), n_batch_(std::max<std::size_t>(n_batch, 1)),
      n_workers_(std::max<std::size_t>(n_workers, 1)) {
  model_.validate();
  pattern_ = build_pattern(fe.mesh);
  const std::size_t n_el = fe.mesh.n_elements();
  const std::size_t total_qp = n_el * kQuadPoints;
  const std::size_t m = model.kinematics.size();
  std::size_t active = 1;
  if (mode == AssemblyMode::Partitioned) active = std::max<std::size_t>(1, std::min(n_workers_, n_el));
  for (std::size_t w = 0; w < active; ++w) {
    auto wk = std::make_unique<Worker>();
    wk->id = w;
    wk->e_begin = n_el * w / active;
    wk->e_end = n_el * (w + 1) / active;
    const std::size_t qps = (wk->e_end - wk->e_begin) * kQuadPoints;
    std::size_t cap = 1;
    switch (mode) {
      case AssemblyMode::Traditional: cap = 1; break;
      case AssemblyMode::Global: cap = total_qp; break;
      case AssemblyMode::Batch:
      case AssemblyMode::Partitioned: cap = std::min(n_batch_, std::max<std::size_t>(qps, 1)); break;
    }
    wk->batch.reserve(cap, m);
    if (mode == AssemblyMode::Partitioned) {
      wk->ke_store.resize((wk->e_end - wk->e_begin) * 576);
      wk->re_store.resize((wk->e_end - wk->e_begin) * 24);
    }
    workers_.push_back(std::move(wk));
  }

  // Traction loads: 2x2 Gauss on each bilinear reference facet.
  for (const Traction& t : fe.dofs.tractions) {
    auto it = fe.mesh.facetsets.find(t.facetset);
    if (it == fe.mesh.facetsets.end())
      throw ValidationError("unknown facetset '" + t.facetset + "'");
    std::vector<std::pair<std::size_t, double>> loads;
    const double gq = 1.0 / std::sqrt(3.0);
    for (const auto& facet : it->second)
      for (int qa = 0; qa < 2; ++qa)
        for (int qb = 0; qb < 2; ++qb) {
          const double s = qa ? gq : -gq, r = qb ? gq : -gq;
          const double n[4] = {0.25 * (1 - s) * (1 - r), 0.25 * (1 + s) * (1 - r),
                               0.25 * (1 + s) * (1 + r), 0.25 * (1 - s) * (1 + r)};
          const double ds[4] = {-0.25 * (1 - r), 0.25 * (1 - r), 0.25 * (1 + r), -0.25 * (1 + r)};
          const double dr[4] = {-0.25 * (1 - s), -0.25 * (1 + s), 0.25 * (1 + s), 0.25 * (1 - s)};
          Vec3 xs{}, xr{};
          for (int a = 0; a < 4; ++a)
            for (int d = 0; d < 3; ++d) {
              xs[d] += ds[a] * fe.mesh.nodes[facet[a]][d];
              xr[d] += dr[a] * fe.mesh.nodes[facet[a]][d];
            }
          const Vec3 cr{xs[1] * xr[2] - xs[2] * xr[1], xs[2] * xr[0] - xs[0] * xr[2],
                        xs[0] * xr[1] - xs[1] * xr[0]};
          const double da = norm(cr);
          for (int a = 0; a < 4; ++a)
            for (int d = 0; d < 3; ++d)
              if (t.t[d] != 0.0) loads.push_back({DofMap::dof(facet[a], d), t.t[d] * n[a] * da});
        }
    traction_loads_.push_back(std::move(loads));
  }
}

Assembler::~Assembler() = default;

std::size_t Assembler::workspace_bytes() const {
  std::size_t b = 0;
  for (const auto& w : workers_)
    b += w->batch.bytes() + (w->ke_store.capacity() + w->re_store.capacity()) * sizeof(double);
  return b;
}

void Assembler::run_worker(Worker& w, const std::vector<double>& u, bool tangent) {
  const Mesh& mesh = fe_.mesh;
  const QuadCache& cache = fe_.cache;
  const bool store = mode_ == AssemblyMode::Partitioned;
  double* kbuf = tangent ? w.ke : nullptr;
  w.constitutive_seconds = 0.0;
  w.max_trace_c = 0.0;
  MaterialBatch& batch = w.batch;
  const std::size_t cap = batch.capacity();
  const std::size_t q_begin = w.e_begin * kQuadPoints, q_end = w.e_end * kQuadPoints;
  const int worker_tag = store ? static_cast<int>(w.id) : -1;

  auto flush = [&](std::size_t e) {
    if (store) {
      const std::size_t le = e - w.e_begin;
      if (tangent) std::copy(w.ke, w.ke + 576, w.ke_store.begin() + le * 576);
      std::copy(w.re, w.re + 24, w.re_store.begin() + le * 24);
    }
  };

  // Runs of `cap` quadrature points in global (element, qp) order; the
  // traditional algorithm is the cap = 1 case with the same arithmetic.
  std::fill(w.ke, w.ke + 576, 0.0);
  std::fill(w.re, w.re + 24, 0.0);
  for (std::size_t start = q_begin; start < q_end; start += cap) {
    const std::size_t count = std::min(cap, q_end - start);
    batch.set_size(count);
    for (std::size_t p = 0; p < count; ++p) {
      const std::size_t idx = start + p;
      const std::size_t e = idx / kQuadPoints;
      const Mat3 f = trial_f(u.data(), mesh.elements[e], cache.gradients(e, idx % kQuadPoints));
      w.max_trace_c = std::max(w.max_trace_c, trace_c(f));
      batch.set_f(p, f);
    }
    const auto t0 = Clock::now();
    try {
      eval_batch(model_, batch);
    } catch (const PointError& err) {
      const std::size_t idx = start + err.index();
      throw AssemblyError(idx / kQuadPoints, static_cast<int>(idx % kQuadPoints), worker_tag,
                          err.what());
    }
    w.constitutive_seconds += seconds_since(t0);
    for (std::size_t p = 0; p < count; ++p) {
      const std::size_t idx = start + p;
      const std::size_t e = idx / kQuadPoints;
      const int q = static_cast<int>(idx % kQuadPoints);
      accumulate_qp(cache.gradients(e, q), cache.weight[idx], batch.get_f(p), batch.tau(p),
                    batch.c(p), kbuf, w.re);
      if (q == kQuadPoints - 1) {
        if (store) {
          flush(e);
        } else {
          scatter(e, tangent ? w.ke : nullptr, w.re);
        }
        std::fill(w.ke, w.ke + 576, 0.0);
        std::fill(w.re, w.re + 24, 0.0);
      }
    }
  }
}

void Assembler::scatter(std::size_t e, const double* ke, const double* re) {
  const auto& el = fe_.mesh.elements[e];
  std::vector<double>& r = *target_r_;
  for (int a = 0; a < 8; ++a)
    for (int i = 0; i < 3; ++i) r[DofMap::dof(el[a], i)] += re[3 * a + i];
  if (ke == nullptr) return;
  double* val = target_k_->val.data();
  const std::size_t* slots = pattern_.element_slots.data() + e * 576;
  for (int ab = 0; ab < 576; ++ab) val[slots[ab]] += ke[ab];
}

void Assembler::merge(const std::vector<double>& u, double lambda, CsrMatrix* k,
                      std::vector<double>& r, bool tangent) {
  (void)u;
  (void)k;
  if (mode_ == AssemblyMode::Partitioned)
    for (const auto& w : workers_)
      for (std::size_t e = w->e_begin; e < w->e_end; ++e) {
        const std::size_t le = e - w->e_begin;
        scatter(e, tangent ? w->ke_store.data() + le * 576 : nullptr, w->re_store.data() + le * 24);
      }
  for (const auto& loads : traction_loads_)
    for (const auto& [dof, value] : loads) r[dof] -= lambda * value;
}

void Assembler::run(const std::vector<double>& u, double lambda, CsrMatrix* k,
                    std::vector<double>& r, bool tangent, AssemblyStats* stats) {
  if (u.size() != fe_.mesh.n_dofs()) throw ValidationError("displacement vector has wrong length");
  const auto t0 = Clock::now();
  if (tangent) {
    if (k->n != pattern_.matrix.n || k->val.size() != pattern_.matrix.val.size() ||
        k->col != pattern_.matrix.col)
      *k = pattern_.matrix;
    std::fill(k->val.begin(), k->val.end(), 0.0);
  }
  r.assign(fe_.mesh.n_dofs(), 0.0);
  target_k_ = k;
  target_r_ = &r;
  if (workers_.size() == 1) {
    run_worker(*workers_[0], u, tangent);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers_.size());
    for (auto& w : workers_) {
      w->error = nullptr;
      threads.emplace_back([this, &w, &u, tangent] {
        try {
          run_worker(*w, u, tangent);
        } catch (...) {
          w->error = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& w : workers_)
      if (w->error) std::rethrow_exception(w->error);
  }
  merge(u, lambda, k, r, tangent);
  target_k_ = nullptr;
  target_r_ = nullptr;
  if (stats) {
    stats->constitutive_seconds = 0.0;
    stats->max_trace_c = 0.0;
    for (const auto& w : workers_) {
      // Workers run concurrently, so the wall-clock share is the slowest one.
      stats->constitutive_seconds = std::max(stats->constitutive_seconds, w->constitutive_seconds);
      stats->max_trace_c = std::max(stats->max_trace_c, w->max_trace_c);
    }
    stats->active_workers = workers_.size();
    stats->total_seconds = seconds_since(t0);
  }
}

void Assembler::assemble(const std::vector<double>& u, double lambda, CsrMatrix& k,
                         std::vector<double>& r, AssemblyStats* stats) {
  run(u, lambda, &k, r, true, stats);
}

void Assembler::residual(const std::vector<double>& u, double lambda, std::vector<double>& r) {
  run(u, lambda, nullptr, r, false, nullptr);
}

void assemble_traditional(const NcmDefinition& model, const FeModel& fe,
                          const std::vector<double>& u, CsrMatrix& k, std::vector<double>& r) {
  Assembler(model, fe, AssemblyMode::Traditional).assemble(u, 1.0, k, r);
}

void assemble_global_vectorized(const NcmDefinition& model, const FeModel& fe,
                                const std::vector<double>& u, CsrMatrix& k,
                                std::vector<double>& r) {
  Assembler(model, fe, AssemblyMode::Global).assemble(u, 1.0, k, r);
}

void assemble_batch_vectorized(const NcmDefinition& model, const FeModel& fe,
                               const std::vector<double>& u, std::size_t n_batch, CsrMatrix& k,
                               std::vector<double>& r) {
  Assembler(model, fe, AssemblyMode::Batch, n_batch).assemble(u, 1.0, k, r);
}

void assemble_partitioned(const NcmDefinition& model, const FeModel& fe,
                          const std::vector<double>& u, std::size_t n_batch,
                          std::size_t n_workers, CsrMatrix& k, std::vector<double>& r) {
  Assembler(model, fe, AssemblyMode::Partitioned, n_batch, n_workers).assemble(u, 1.0, k, r);
}

}  // namespace ncmfe
