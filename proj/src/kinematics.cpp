#include "ncmfe/kinematics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ncmfe/errors.hpp"

namespace ncmfe {

namespace {

constexpr Stiffness3 identity_outer() {
  Stiffness3 c;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) c(a, b) = 1.0;
  return c;
}

constexpr Stiffness3 identity_bar() {
  Stiffness3 c;
  for (int a = 0; a < 3; ++a) c(a, a) = 1.0;
  for (int a = 3; a < 6; ++a) c(a, a) = 0.5;
  return c;
}

constexpr Stiffness3 kIdOuter = identity_outer();
constexpr Stiffness3 kIdBar = identity_bar();

// Isochoric exponent e_m on I3 for each invariant kind.
double iso_exponent(InvariantKind k) {
  switch (k) {
    case InvariantKind::I2:
    case InvariantKind::I5:
      return -2.0 / 3.0;
    default:
      return -1.0 / 3.0;
  }
}

struct Basics {
  double jac;
  SymTensor3 b;
  double i1;
};

Basics basics(const Mat3& f) {
  const double jac = det(f);
  if (!(jac > kMinDetF))
    throw DomainError("deformation gradient with det F = " + std::to_string(jac) +
                      " is not admissible");
  const SymTensor3 b = left_cauchy_green(f);
  return {jac, b, trace(b)};
}

// Standard invariant with its G/GG tensors. J and I3 use the same routine.
template <bool Derivs>
double standard_term(const InvariantSpec& s, const Basics& k, const std::vector<Vec3>& a_cur,
                     SymTensor3* g, Stiffness3* gg) {
  switch (s.kind) {
    case InvariantKind::I1:
      if constexpr (Derivs) {
        *g = k.b;
        *gg = Stiffness3{};
      }
      return k.i1;
    case InvariantKind::I2: {
      const SymTensor3 b2 = sym_product(k.b, k.b);
      if constexpr (Derivs) {
        *g = k.i1 * k.b - b2;
        *gg = tensor_prod(k.b, k.b) - tensor_prod_bar(k.b, k.b);
      }
      return 0.5 * (k.i1 * k.i1 - trace(b2));
    }
    case InvariantKind::I3: {
      const double i3 = k.jac * k.jac;
      if constexpr (Derivs) {
        *g = i3 * SymTensor3::identity();
        *gg = i3 * (kIdOuter - kIdBar);
      }
      return i3;
    }
    case InvariantKind::J:
      if constexpr (Derivs) {
        *g = (0.5 * k.jac) * SymTensor3::identity();
        *gg = (0.25 * k.jac) * (kIdOuter - 2.0 * kIdBar);
      }
      return k.jac;
    case InvariantKind::I4: {
      const Vec3& ai = a_cur[s.i];
      const Vec3& aj = a_cur[s.j];
      if constexpr (Derivs) {
        *g = sym_outer(ai, aj);
        *gg = Stiffness3{};
      }
      return dot(ai, aj);
    }
    case InvariantKind::I5: {
      const Vec3& ai = a_cur[s.i];
      const Vec3& aj = a_cur[s.j];
      if constexpr (Derivs) {
        const SymTensor3 sij = sym_outer(ai, aj);
        // B S + S B; reduces to 2 sym(a (x) B a) on the diagonal pairs.
        *g = 2.0 * sym_product(k.b, sij);
        *gg = tensor_prod_bar(k.b, sij) + tensor_prod_bar(sij, k.b);
      }
      return dot(ai, k.b * aj);
    }
  }
  return 0.0;
}

template <bool Derivs>
void evaluate(const KinematicConfig& cfg, const Mat3& f, double* values, double* g_out,
              double* gg_out) {
  const Basics k = basics(f);
  std::vector<Vec3> a_cur;
  if (!cfg.structural_vectors.empty()) {
    a_cur.reserve(cfg.structural_vectors.size());
    for (const Vec3& a : cfg.structural_vectors) a_cur.push_back(f * a);
  }
  const bool iso = cfg.variant == KinematicVariant::IsochoricPlusJ;
  // I3^(-1/3) = J^(-2/3)
  const double s13 = iso ? std::pow(k.jac, -2.0 / 3.0) : 1.0;

  for (std::size_t m = 0; m < cfg.invariants.size(); ++m) {
    const InvariantSpec& spec = cfg.invariants[m];
    SymTensor3 g;
    Stiffness3 gg;
    double value = standard_term<Derivs>(spec, k, a_cur, &g, &gg);
    if (iso && spec.kind != InvariantKind::J) {
      const double e = iso_exponent(spec.kind);
      const double scale = e < -0.5 ? s13 * s13 : s13;
      value *= scale;
      if constexpr (Derivs) {
        const SymTensor3 g_iso = scale * g;
        const Stiffness3 gg_iso = scale * gg;
        g = g_iso + (e * value) * SymTensor3::identity();
        gg = gg_iso + e * (tensor_prod(SymTensor3::identity(), g_iso) +
                           tensor_prod(g_iso, SymTensor3::identity()) +
                           value * (e * kIdOuter - kIdBar));
      }
    }
    values[m] = value;
    if constexpr (Derivs) {
      std::copy(g.v.begin(), g.v.end(), g_out + 6 * m);
      std::copy(gg.v.begin(), gg.v.end(), gg_out + 36 * m);
    }
  }
}

KinematicEval to_eval(const Mat3& f, const KinematicConfig& cfg) {
  const std::size_t m = cfg.size();
  KinematicEval out;
  out.values.resize(m);
  out.g.resize(m);
  out.gg.resize(m);
  evaluate<true>(cfg, f, out.values.data(), m ? out.g[0].v.data() : nullptr,
                 m ? out.gg[0].v.data() : nullptr);
  return out;
}

}  // namespace

std::string to_string(const InvariantSpec& s) {
  switch (s.kind) {
    case InvariantKind::I1: return "I1";
    case InvariantKind::I2: return "I2";
    case InvariantKind::I3: return "I3";
    case InvariantKind::J: return "J";
    case InvariantKind::I4:
    case InvariantKind::I5:
      return std::string(s.kind == InvariantKind::I4 ? "I4" : "I5") + "[" +
             std::to_string(s.i) + "," + std::to_string(s.j) + "]";
  }
  return "?";
}

InvariantSpec parse_invariant(std::string_view text) {
  if (text == "I1") return {InvariantKind::I1};
  if (text == "I2") return {InvariantKind::I2};
  if (text == "I3") return {InvariantKind::I3};
  if (text == "J") return {InvariantKind::J};
  if (text.size() >= 7 && (text.starts_with("I4[") || text.starts_with("I5[")) &&
      text.back() == ']') {
    InvariantSpec s{text[1] == '4' ? InvariantKind::I4 : InvariantKind::I5};
    const std::string_view body = text.substr(3, text.size() - 4);
    const auto comma = body.find(',');
    if (comma != std::string_view::npos) {
      const auto r1 = std::from_chars(body.data(), body.data() + comma, s.i);
      const auto r2 = std::from_chars(body.data() + comma + 1, body.data() + body.size(), s.j);
      if (r1.ec == std::errc{} && r2.ec == std::errc{} && r1.ptr == body.data() + comma &&
          r2.ptr == body.data() + body.size())
        return s;
    }
  }
  throw ValidationError("unknown invariant '" + std::string(text) + "'");
}

std::string to_string(KinematicVariant v) {
  return v == KinematicVariant::Standard ? "standard" : "isochoric";
}

KinematicVariant parse_variant(std::string_view text) {
  if (text == "standard") return KinematicVariant::Standard;
  if (text == "isochoric") return KinematicVariant::IsochoricPlusJ;
  throw ValidationError("unknown kinematic variant '" + std::string(text) + "'");
}

void KinematicConfig::validate() const {
  if (invariants.empty()) throw ValidationError("kinematic.invariants: no active invariants");
  for (std::size_t k = 0; k < structural_vectors.size(); ++k) {
    if (std::abs(norm(structural_vectors[k]) - 1.0) > 1e-12)
      throw ValidationError("kinematic.structural_vectors[" + std::to_string(k) +
                            "]: not a unit vector");
  }
  const int nsv = static_cast<int>(structural_vectors.size());
  for (std::size_t k = 0; k < invariants.size(); ++k) {
    const InvariantSpec& s = invariants[k];
    const std::string at = "kinematic.invariants[" + std::to_string(k) + "]";
    if (s.kind == InvariantKind::I3 && variant == KinematicVariant::IsochoricPlusJ)
      throw ValidationError(at + ": I3 is not an input of the isochoric variant");
    if (s.kind == InvariantKind::I4 || s.kind == InvariantKind::I5) {
      if (s.i < 0 || s.j < 0 || s.i >= nsv || s.j >= nsv)
        throw ValidationError(at + ": " + to_string(s) + " references a missing structural vector");
    }
  }
}

KinematicConfig KinematicConfig::standard() {
  return {KinematicVariant::Standard,
          {{InvariantKind::I1}, {InvariantKind::I2}, {InvariantKind::I3}},
          {}};
}

KinematicConfig KinematicConfig::isochoric() {
  return {KinematicVariant::IsochoricPlusJ,
          {{InvariantKind::I1}, {InvariantKind::I2}, {InvariantKind::J}},
          {}};
}

KinematicConfig& KinematicConfig::with_fibres(bool with_i5, bool cross_pairs) {
  const int nsv = static_cast<int>(structural_vectors.size());
  for (int i = 0; i < nsv; ++i)
    for (int j = i; j < nsv; ++j) {
      if (i != j && !cross_pairs) continue;
      invariants.push_back({InvariantKind::I4, i, j});
      if (with_i5) invariants.push_back({InvariantKind::I5, i, j});
    }
  return *this;
}

void eval_kinematics(const KinematicConfig& cfg, const Mat3& f, double* values, double* g,
                     double* gg) {
  evaluate<true>(cfg, f, values, g, gg);
}

void eval_kinematic_values(const KinematicConfig& cfg, const Mat3& f, double* values) {
  evaluate<false>(cfg, f, values, nullptr, nullptr);
}

KinematicEval eval_standard(const Mat3& f, const KinematicConfig& cfg) {
  KinematicConfig c = cfg;
  c.variant = KinematicVariant::Standard;
  return to_eval(f, c);
}

KinematicEval eval_isochoric(const Mat3& f, const KinematicConfig& cfg) {
  KinematicConfig c = cfg;
  c.variant = KinematicVariant::IsochoricPlusJ;
  return to_eval(f, c);
}

KinematicEval eval_kinematics(const Mat3& f, const KinematicConfig& cfg) {
  return to_eval(f, cfg);
}

std::string to_string(LoadingPath p) {
  switch (p) {
    case LoadingPath::UT: return "UT";
    case LoadingPath::UC: return "UC";
    case LoadingPath::BT: return "BT";
    case LoadingPath::BC: return "BC";
    case LoadingPath::SS: return "SS";
    case LoadingPath::PS: return "PS";
  }
  return "?";
}

LoadingPath parse_loading_path(std::string_view text) {
  for (LoadingPath p : kAllPaths)
    if (to_string(p) == text) return p;
  throw ValidationError("unknown loading path '" + std::string(text) + "'");
}

Mat3 loading_path(LoadingPath path, double gamma) {
  if (path != LoadingPath::SS && !(gamma > -1.0))
    throw DomainError("loading path " + to_string(path) + " undefined at gamma = " +
                      std::to_string(gamma));
  const double s = 1.0 + gamma;
  switch (path) {
    case LoadingPath::UT: return Mat3::diag(s, 1.0, 1.0);
    case LoadingPath::UC: return Mat3::diag(1.0 / s, 1.0, 1.0);
    case LoadingPath::BT: return Mat3::diag(s, s, 1.0);
    case LoadingPath::BC: return Mat3::diag(1.0 / s, 1.0 / s, 1.0);
    case LoadingPath::SS: {
      Mat3 f = Mat3::identity();
      f(0, 1) = gamma;
      return f;
    }
    case LoadingPath::PS: return Mat3::diag(s, 1.0 / s, 1.0);
  }
  return Mat3::identity();
}

}  // namespace ncmfe
