#include "ncmfe/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ncmfe/errors.hpp"

namespace ncmfe {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "ncmfe-weights/1";

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError((path.empty() ? std::string("<root>") : path) + ": " + what);
}

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string item(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& field(const json& obj, const std::string& path, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(child(path, key), "missing field");
  return *it;
}

const json* optional_field(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  return j;
}

std::vector<double> vector_of(const json& j, const std::string& path, std::size_t expected) {
  array(j, path);
  if (j.size() != expected)
    fail(path, "expected " + std::to_string(expected) + " entries, got " + std::to_string(j.size()));
  std::vector<double> out(expected);
  for (std::size_t i = 0; i < expected; ++i) out[i] = number(j[i], item(path, i));
  return out;
}

// Row-major rows x cols matrix given as an array of rows.
std::vector<double> matrix_of(const json& j, const std::string& path, std::size_t rows,
                              std::size_t cols) {
  array(j, path);
  if (j.size() != rows)
    fail(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  std::vector<double> out;
  out.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::vector<double> row = vector_of(j[r], item(path, r), cols);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

KinematicConfig parse_kinematic(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  KinematicConfig cfg;
  const std::string variant = text(field(j, path, "variant"), child(path, "variant"));
  try {
    cfg.variant = parse_variant(variant);
  } catch (const ValidationError& e) {
    fail(child(path, "variant"), e.what());
  }
  const std::string ipath = child(path, "invariants");
  const json& inv = array(field(j, path, "invariants"), ipath);
  for (std::size_t k = 0; k < inv.size(); ++k) {
    const std::string s = text(inv[k], item(ipath, k));
    try {
      cfg.invariants.push_back(parse_invariant(s));
    } catch (const ValidationError& e) {
      fail(item(ipath, k), e.what());
    }
  }
  if (const json* sv = optional_field(j, "structural_vectors")) {
    const std::string spath = child(path, "structural_vectors");
    array(*sv, spath);
    for (std::size_t k = 0; k < sv->size(); ++k) {
      const std::vector<double> v = vector_of((*sv)[k], item(spath, k), 3);
      cfg.structural_vectors.push_back({v[0], v[1], v[2]});
    }
  }
  return cfg;
}

MicnnWeights parse_micnn(const json& doc, std::size_t inputs) {
  MicnnWeights w;
  w.inputs = inputs;
  if (const json* mono = optional_field(doc, "monotone")) {
    if (!mono->is_boolean()) fail("monotone", "expected a boolean");
    w.monotone = mono->get<bool>();
  }
  const json& layers = array(field(doc, "", "layers"), "layers");
  if (layers.empty()) fail("layers", "no output layer");
  std::size_t prev = inputs;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const std::string lp = item("layers", k);
    const json& l = layers[k];
    if (!l.is_object()) fail(lp, "expected an object");
    const bool last = k + 1 == layers.size();
    MicnnLayer layer;
    layer.in = prev;
    const json& a = array(field(l, lp, "A"), child(lp, "A"));
    layer.out = a.size();
    if (layer.out == 0) fail(child(lp, "A"), "layer has zero width");
    layer.a = matrix_of(a, child(lp, "A"), layer.out, prev);
    layer.b = matrix_of(field(l, lp, "B"), child(lp, "B"), layer.out, inputs);
    if (const json* c = optional_field(l, "c")) {
      if (last) fail(child(lp, "c"), "output layer has no bias");
      layer.c = vector_of(*c, child(lp, "c"), layer.out);
    } else if (!last) {
      fail(child(lp, "c"), "missing field");
    }
    prev = layer.out;
    w.layers.push_back(std::move(layer));
  }
  return w;
}

CannF0 parse_f0(const std::string& s, const std::string& path) {
  if (s == "identity") return CannF0::Identity;
  if (s == "macaulay") return CannF0::Macaulay;
  if (s == "abs") return CannF0::Abs;
  fail(path, "unknown f0 '" + s + "' (identity, macaulay, abs)");
}

CannF2 parse_f2(const std::string& s, const std::string& path) {
  if (s == "linear") return CannF2::Linear;
  if (s == "exp") return CannF2::Exp;
  if (s == "log") return CannF2::Log;
  fail(path, "unknown f2 '" + s + "' (linear, exp, log)");
}

CannWeights parse_cann(const json& doc, std::size_t inputs) {
  CannWeights w;
  w.inputs = inputs;
  const json& br = array(field(doc, "", "branches"), "branches");
  for (std::size_t k = 0; k < br.size(); ++k) {
    const std::string bp = item("branches", k);
    const json& b = br[k];
    if (!b.is_object()) fail(bp, "expected an object");
    CannBranch branch;
    branch.input = count(field(b, bp, "input"), child(bp, "input"));
    branch.f0 = parse_f0(text(field(b, bp, "f0"), child(bp, "f0")), child(bp, "f0"));
    branch.power = integer(field(b, bp, "f1"), child(bp, "f1"));
    branch.f2 = parse_f2(text(field(b, bp, "f2"), child(bp, "f2")), child(bp, "f2"));
    branch.w0 = number(field(b, bp, "w0"), child(bp, "w0"));
    branch.w1 = number(field(b, bp, "w1"), child(bp, "w1"));
    branch.w2 = number(field(b, bp, "w2"), child(bp, "w2"));
    w.branches.push_back(branch);
  }
  return w;
}

IckanWeights parse_ickan(const json& doc, std::size_t inputs) {
  IckanWeights w;
  const json& sp = field(doc, "", "spline");
  if (!sp.is_object()) fail("spline", "expected an object");
  w.order = integer(field(sp, "spline", "order"), "spline.order");
  w.n_basis = integer(field(sp, "spline", "n_basis"), "spline.n_basis");
  const std::vector<double> range = vector_of(field(sp, "spline", "range"), "spline.range", 2);
  w.x_min = range[0];
  w.x_max = range[1];
  if (const json* ex = optional_field(sp, "extrapolation")) {
    const std::string s = text(*ex, "spline.extrapolation");
    if (s == "linear") w.extrapolation = SplineExtrapolation::Linear;
    else if (s == "clamp") w.extrapolation = SplineExtrapolation::Clamp;
    else fail("spline.extrapolation", "unknown policy '" + s + "' (linear, clamp)");
  }
  if (w.order < 1 || w.n_basis <= w.order) fail("spline.n_basis", "too few for the spline order");
  if (const json* kn = optional_field(sp, "knots")) {
    w.knots = vector_of(*kn, "spline.knots", static_cast<std::size_t>(w.order + w.n_basis + 1));
  } else if (w.x_max > w.x_min) {
    w.make_uniform_knots();
  }
  const json& layers = array(field(doc, "", "layers"), "layers");
  std::size_t prev = inputs;
  for (std::size_t r = 0; r < layers.size(); ++r) {
    const std::string lp = item("layers", r);
    const json& l = layers[r];
    if (!l.is_object()) fail(lp, "expected an object");
    IckanLayer layer;
    layer.in = prev;
    layer.out = count(field(l, lp, "out"), child(lp, "out"));
    if (layer.out == 0) fail(child(lp, "out"), "layer has zero width");
    const std::string ep = child(lp, "edges");
    const json& edges = array(field(l, lp, "edges"), ep);
    if (edges.size() != layer.in * layer.out)
      fail(ep, "expected " + std::to_string(layer.in * layer.out) + " edges (out x in), got " +
                   std::to_string(edges.size()));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const std::string eep = item(ep, e);
      if (!edges[e].is_object()) fail(eep, "expected an object");
      IckanEdge edge;
      edge.weight = number(field(edges[e], eep, "w"), child(eep, "w"));
      edge.control = vector_of(field(edges[e], eep, "c"), child(eep, "c"),
                               static_cast<std::size_t>(w.n_basis));
      layer.edges.push_back(std::move(edge));
    }
    prev = layer.out;
    w.layers.push_back(std::move(layer));
  }
  return w;
}

json kinematic_to_json(const KinematicConfig& k) {
  json j;
  j["variant"] = to_string(k.variant);
  j["invariants"] = json::array();
  for (const InvariantSpec& s : k.invariants) j["invariants"].push_back(to_string(s));
  if (!k.structural_vectors.empty()) {
    j["structural_vectors"] = json::array();
    for (const Vec3& v : k.structural_vectors) j["structural_vectors"].push_back(v);
  }
  return j;
}

json rows(const std::vector<double>& v, std::size_t r, std::size_t c) {
  json out = json::array();
  for (std::size_t i = 0; i < r; ++i)
    out.push_back(std::vector<double>(v.begin() + i * c, v.begin() + (i + 1) * c));
  return out;
}

const char* f0_name(CannF0 f) {
  switch (f) {
    case CannF0::Identity: return "identity";
    case CannF0::Macaulay: return "macaulay";
    case CannF0::Abs: return "abs";
  }
  return "?";
}

const char* f2_name(CannF2 f) {
  switch (f) {
    case CannF2::Linear: return "linear";
    case CannF2::Exp: return "exp";
    case CannF2::Log: return "log";
  }
  return "?";
}

}  // namespace

NcmDefinition model_from_string(const std::string& source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("<root>: not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("", "expected an object");
  if (const json* fmt = optional_field(doc, "format")) {
    if (text(*fmt, "format") != kFormat)
      fail("format", "unsupported format '" + fmt->get<std::string>() + "'");
  }

  NcmDefinition m;
  if (const json* name = optional_field(doc, "name")) m.name = text(*name, "name");
  const std::string arch = text(field(doc, "", "architecture"), "architecture");
  if (const json* mode = optional_field(doc, "derivative_mode")) {
    const std::string name = text(*mode, "derivative_mode");
    try {
      m.mode = parse_derivative_mode(name);
    } catch (const ValidationError& e) {
      fail("derivative_mode", e.what());
    }
  }
  m.kinematics = parse_kinematic(field(doc, "", "kinematic"), "kinematic");
  const std::size_t inputs = m.kinematics.size();

  if (arch == "micnn") m.network = parse_micnn(doc, inputs);
  else if (arch == "cann") m.network = parse_cann(doc, inputs);
  else if (arch == "ickan") m.network = parse_ickan(doc, inputs);
  else if (arch == "gent_thomas") m.network = GentThomasInner{};
  else fail("architecture", "unknown architecture '" + arch + "' (micnn, cann, ickan, gent_thomas)");

  if (const json* fit = optional_field(doc, "reference_fit")) {
    if (!fit->is_object()) fail("reference_fit", "expected an object");
    ReferenceFit rf;
    if (const json* r = optional_field(*fit, "reference"))
      rf.reference = text(*r, "reference_fit.reference");
    if (rf.reference != "gent_thomas")
      fail("reference_fit.reference", "only gent_thomas is available");
    rf.gamma_max = number(field(*fit, "reference_fit", "gamma_max"), "reference_fit.gamma_max");
    rf.steps = integer(field(*fit, "reference_fit", "steps"), "reference_fit.steps");
    rf.tolerance = number(field(*fit, "reference_fit", "tolerance"), "reference_fit.tolerance");
    if (rf.steps < 1) fail("reference_fit.steps", "must be at least 1");
    if (!(rf.tolerance > 0.0)) fail("reference_fit.tolerance", "must be positive");
    m.reference_fit = rf;
  }

  m.validate();
  return m;
}

NcmDefinition load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open weight file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return model_from_string(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string model_to_string(const NcmDefinition& m, int indent) {
  json doc;
  doc["format"] = kFormat;
  if (!m.name.empty()) doc["name"] = m.name;
  doc["architecture"] = m.architecture();
  doc["derivative_mode"] = to_string(m.mode);
  doc["kinematic"] = kinematic_to_json(m.kinematics);
  std::visit(
      [&](const auto& w) {
        using T = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<T, MicnnWeights>) {
          doc["monotone"] = w.monotone;
          doc["layers"] = json::array();
          for (const MicnnLayer& l : w.layers) {
            json lj;
            lj["A"] = rows(l.a, l.out, l.in);
            lj["B"] = rows(l.b, l.out, w.inputs);
            if (!l.c.empty()) lj["c"] = l.c;
            doc["layers"].push_back(lj);
          }
        } else if constexpr (std::is_same_v<T, CannWeights>) {
          doc["branches"] = json::array();
          for (const CannBranch& b : w.branches)
            doc["branches"].push_back({{"input", b.input},
                                       {"f0", f0_name(b.f0)},
                                       {"f1", b.power},
                                       {"f2", f2_name(b.f2)},
                                       {"w0", b.w0},
                                       {"w1", b.w1},
                                       {"w2", b.w2}});
        } else if constexpr (std::is_same_v<T, IckanWeights>) {
          doc["spline"] = {{"order", w.order},
                           {"n_basis", w.n_basis},
                           {"range", {w.x_min, w.x_max}},
                           {"extrapolation",
                            w.extrapolation == SplineExtrapolation::Linear ? "linear" : "clamp"},
                           {"knots", w.knots}};
          doc["layers"] = json::array();
          for (const IckanLayer& l : w.layers) {
            json lj;
            lj["out"] = l.out;
            lj["edges"] = json::array();
            for (const IckanEdge& e : l.edges) lj["edges"].push_back({{"w", e.weight}, {"c", e.control}});
            doc["layers"].push_back(lj);
          }
        }
      },
      m.network);
  if (m.reference_fit) {
    doc["reference_fit"] = {{"reference", m.reference_fit->reference},
                            {"gamma_max", m.reference_fit->gamma_max},
                            {"steps", m.reference_fit->steps},
                            {"tolerance", m.reference_fit->tolerance}};
  }
  return doc.dump(indent);
}

void save_model(const NcmDefinition& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError(path + ": cannot write weight file");
  out << model_to_string(model) << "\n";
}

}  // namespace ncmfe
