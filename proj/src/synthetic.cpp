#include "ncmfe/synthetic.hpp"

namespace ncmfe {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Convex, nondecreasing control points.
std::vector<double> convex_controls(std::mt19937_64& rng, int n) {
  std::vector<double> c(n);
  double slope = uniform(rng, 0.0, 0.1);
  c[0] = uniform(rng, -0.5, 0.5);
  for (int i = 1; i < n; ++i) {
    c[i] = c[i - 1] + slope;
    slope += uniform(rng, 0.05, 0.5);
  }
  return c;
}

}  // namespace

MicnnWeights random_micnn(std::mt19937_64& rng, std::size_t inputs,
                          const std::vector<std::size_t>& hidden, bool monotone) {
  MicnnWeights w;
  w.inputs = inputs;
  w.monotone = monotone;
  std::size_t prev = inputs;
  for (std::size_t k = 0; k <= hidden.size(); ++k) {
    const bool last = k == hidden.size();
    MicnnLayer l;
    l.in = prev;
    l.out = last ? 1 : hidden[k];
    l.a.resize(l.out * l.in);
    l.b.resize(l.out * inputs);
    for (double& x : l.a) x = uniform(rng, 0.0, 1.0 / l.in);
    for (double& x : l.b) x = monotone ? uniform(rng, 0.0, 0.5 / inputs) : uniform(rng, -0.2, 0.5);
    if (!last) {
      l.c.resize(l.out);
      for (double& x : l.c) x = uniform(rng, -2.0, 0.5);
    }
    prev = l.out;
    w.layers.push_back(std::move(l));
  }
  return w;
}

CannWeights random_cann(std::mt19937_64& rng, std::size_t inputs) {
  CannWeights w;
  w.inputs = inputs;
  for (std::size_t m = 0; m < inputs; ++m) {
    const double ref = uniform(rng, 0.5, 3.0);
    w.branches.push_back({m, CannF0::Identity, 1, CannF2::Linear, ref, uniform(rng, 0.1, 1.0),
                          uniform(rng, 0.1, 1.0)});
    w.branches.push_back({m, CannF0::Identity, 2, CannF2::Exp, ref, uniform(rng, 0.05, 0.3),
                          uniform(rng, 0.1, 1.0)});
    w.branches.push_back({m, CannF0::Macaulay, 2, CannF2::Linear, ref, uniform(rng, 0.1, 1.0),
                          uniform(rng, 0.1, 1.0)});
    w.branches.push_back({m, CannF0::Abs, 1, CannF2::Log, ref, uniform(rng, 0.01, 0.05),
                          uniform(rng, 0.1, 1.0)});
    w.branches.push_back({m, CannF0::Identity, 3, CannF2::Linear, 0.0, uniform(rng, 0.0, 0.05),
                          uniform(rng, 0.0, 0.2)});
  }
  return w;
}

IckanWeights random_ickan(std::mt19937_64& rng, std::size_t inputs,
                          const std::vector<std::size_t>& hidden) {
  IckanWeights w;
  w.order = 3;
  w.n_basis = 8;
  w.x_min = -2.0;
  w.x_max = 10.0;
  w.make_uniform_knots();
  std::size_t prev = inputs;
  for (std::size_t r = 0; r <= hidden.size(); ++r) {
    IckanLayer l;
    l.in = prev;
    l.out = r == hidden.size() ? 1 : hidden[r];
    for (std::size_t e = 0; e < l.in * l.out; ++e)
      l.edges.push_back({uniform(rng, 0.0, 1.0 / l.in), convex_controls(rng, w.n_basis)});
    prev = l.out;
    w.layers.push_back(std::move(l));
  }
  return w;
}

const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::Micnn: return "micnn";
    case Architecture::Cann: return "cann";
    case Architecture::Ickan: return "ickan";
  }
  return "?";
}

NcmDefinition random_model(std::mt19937_64& rng, Architecture arch,
                           const KinematicConfig& kinematics) {
  NcmDefinition m;
  m.name = std::string("random_") + to_string(arch);
  m.kinematics = kinematics;
  const std::size_t n = kinematics.size();
  switch (arch) {
    case Architecture::Micnn: m.network = random_micnn(rng, n); break;
    case Architecture::Cann: m.network = random_cann(rng, n); break;
    case Architecture::Ickan: m.network = random_ickan(rng, n); break;
  }
  m.validate();
  return m;
}

}  // namespace ncmfe
