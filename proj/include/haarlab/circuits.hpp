#pragma once

#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "haarlab/kwise.hpp"
#include "haarlab/linalg.hpp"
#include "haarlab/serialize.hpp"

namespace haarlab::circuits {

using kwise::FunctionSample;

// ---------------------------------------------------------------------------
// Circuit IR.  Dense gates carry an explicit unitary; shuffle and phase gates
// act symbolically on packed basis indices and are only expanded to matrices
// inside dense_matrix().
// ---------------------------------------------------------------------------

struct Gate {
  enum class Kind { dense, shuffle_left, shuffle_right, ternary_phase };
  Kind kind = Kind::dense;
  std::vector<int> targets;
  Mat payload;      // dense
  FunctionSample fn;  // symbolic

  static Gate make_dense(Mat u, std::vector<int> targets_) {
    Gate g;
    g.kind = Kind::dense;
    g.payload = std::move(u);
    g.targets = std::move(targets_);
    return g;
  }
};

struct Circuit {
  int num_qubits = 0;
  std::vector<std::vector<Gate>> layers;  // gates within a layer have disjoint targets
  json metadata;

  int depth() const { return static_cast<int>(layers.size()); }

  void push_layer(std::vector<Gate> gates) {
    std::set<int> seen;
    for (const auto& g : gates)
      for (int q : g.targets) {
        if (!seen.insert(q).second)
          throw std::invalid_argument("Circuit: overlapping targets within a layer");
        if (q < 0 || q >= num_qubits) throw std::invalid_argument("Circuit: target out of range");
      }
    layers.push_back(std::move(gates));
  }
};

// ---------------------------------------------------------------------------
// Symbolic gate actions.  Left half = qubits [0, n/2), right half = the rest;
// with qubit 0 as MSB the left half occupies the high bits of the index.
// ---------------------------------------------------------------------------

// S_L |x_<, x_>> = |x_< ^ h1(x_>), x_>>
inline void apply_shuffle_left_inplace(StateVector& state, const FunctionSample& h1) {
  const int n = state.num_qubits;
  if (n % 2) throw std::invalid_argument("apply_shuffle_left: n must be even");
  const int h = n / 2;
  if (h1.family.domain_bits != h ||
      (h1.family.range == kwise::Range::bits && h1.family.range_bits != h) ||
      h1.family.range == kwise::Range::ternary)
    throw std::invalid_argument("apply_shuffle_left: function width mismatch");
  const int64_t half = int64_t(1) << h;
  Vec out = Vec::Zero(state.amps.size());
  for (int64_t lo = 0; lo < half; ++lo) {
    int64_t shift = int64_t(h1.evaluate(uint64_t(lo))) << h;
    for (int64_t hi = 0; hi < half; ++hi) {
      int64_t src = (hi << h) | lo;
      out(src ^ shift) = state.amps(src);
    }
  }
  state.amps = std::move(out);
}

// S_R |x_<, x_>> = |x_<, x_> ^ h2(x_<)>
inline void apply_shuffle_right_inplace(StateVector& state, const FunctionSample& h2) {
  const int n = state.num_qubits;
  if (n % 2) throw std::invalid_argument("apply_shuffle_right: n must be even");
  const int h = n / 2;
  if (h2.family.domain_bits != h ||
      (h2.family.range == kwise::Range::bits && h2.family.range_bits != h) ||
      h2.family.range == kwise::Range::ternary)
    throw std::invalid_argument("apply_shuffle_right: function width mismatch");
  const int64_t half = int64_t(1) << h;
  Vec out = Vec::Zero(state.amps.size());
  for (int64_t hi = 0; hi < half; ++hi) {
    int64_t shift = int64_t(h2.evaluate(uint64_t(hi)));
    for (int64_t lo = 0; lo < half; ++lo) {
      int64_t src = (hi << h) | lo;
      out(src ^ shift) = state.amps(src);
    }
  }
  state.amps = std::move(out);
}

// F = sum_x w^{f(x)} |x><x|, w = exp(2 pi i / 3)
inline void apply_ternary_phase_inplace(StateVector& state, const FunctionSample& f) {
  if (f.family.range != kwise::Range::ternary)
    throw std::invalid_argument("apply_ternary_phase: ternary range required");
  if (f.family.domain_bits != state.num_qubits)
    throw std::invalid_argument("apply_ternary_phase: domain width mismatch");
  static const cplx omega[3] = {cplx(1.0, 0.0),
                                cplx(-0.5, 0.8660254037844386467637231707529),
                                cplx(-0.5, -0.8660254037844386467637231707529)};
  for (int64_t x = 0; x < state.amps.size(); ++x)
    state.amps(x) *= omega[f.evaluate(uint64_t(x))];
}

inline StateVector apply_shuffle_left(const StateVector& s, const FunctionSample& h1) {
  StateVector out = s;
  apply_shuffle_left_inplace(out, h1);
  return out;
}
inline StateVector apply_shuffle_right(const StateVector& s, const FunctionSample& h2) {
  StateVector out = s;
  apply_shuffle_right_inplace(out, h2);
  return out;
}
inline StateVector apply_ternary_phase(const StateVector& s, const FunctionSample& f) {
  StateVector out = s;
  apply_ternary_phase_inplace(out, f);
  return out;
}

inline void apply_gate_generic(StateVector& state, const Gate& g) {
  switch (g.kind) {
    case Gate::Kind::dense:
      apply_gate_inplace(state, g.payload, g.targets);
      break;
    case Gate::Kind::shuffle_left:
      apply_shuffle_left_inplace(state, g.fn);
      break;
    case Gate::Kind::shuffle_right:
      apply_shuffle_right_inplace(state, g.fn);
      break;
    case Gate::Kind::ternary_phase:
      apply_ternary_phase_inplace(state, g.fn);
      break;
  }
}

inline void apply_circuit_inplace(StateVector& state, const Circuit& c) {
  if (state.num_qubits != c.num_qubits)
    throw std::invalid_argument("apply_circuit: qubit count mismatch");
  for (const auto& layer : c.layers)
    for (const auto& g : layer) apply_gate_generic(state, g);
}

inline StateVector apply_circuit(const StateVector& state, const Circuit& c) {
  StateVector out = state;
  apply_circuit_inplace(out, c);
  return out;
}

// Exact product of layer unitaries; symbolic gates are expanded as their
// permutation/diagonal action on basis columns.
inline Mat dense_matrix(const Circuit& c) {
  if (c.num_qubits > 12) throw std::invalid_argument("dense_matrix: num_qubits > 12");
  const int64_t N = dim_of(c.num_qubits);
  Mat m = Mat::Identity(N, N);
  StateVector col;
  col.num_qubits = c.num_qubits;
  for (int64_t j = 0; j < N; ++j) {
    col.amps = m.col(j);
    for (const auto& layer : c.layers)
      for (const auto& g : layer) apply_gate_generic(col, g);
    m.col(j) = col.amps;
  }
  return m;
}

// Forward-propagated support set of a qubit.
inline std::set<int> light_cone(const Circuit& c, int qubit) {
  if (qubit < 0 || qubit >= c.num_qubits) throw std::invalid_argument("light_cone: qubit out of range");
  std::set<int> cone{qubit};
  auto touches = [&](const std::vector<int>& targets) {
    for (int q : targets)
      if (cone.count(q)) return true;
    return false;
  };
  for (const auto& layer : c.layers)
    for (const auto& g : layer) {
      std::vector<int> tgt = g.targets;
      if (g.kind != Gate::Kind::dense) {
        tgt.resize(c.num_qubits);
        std::iota(tgt.begin(), tgt.end(), 0);  // shuffles/phases touch the full register
      }
      if (touches(tgt)) cone.insert(tgt.begin(), tgt.end());
    }
  return cone;
}

// ---------------------------------------------------------------------------
// Ensemble samplers
// ---------------------------------------------------------------------------

inline Mat haar_sample(int64_t dim, Rng& rng) {
  if (dim < 2) throw std::invalid_argument("haar_sample: dim must be >= 2");
  return haar_unitary(dim, rng);
}

inline std::vector<int> all_qubits(int n) {
  std::vector<int> q(n);
  std::iota(q.begin(), q.end(), 0);
  return q;
}

// U = D * S_R * S_L * F * C, i.e. the phase gate acts on the raw input before
// the two Feistel shuffles.  The main text lists the phase between the
// shuffles, but the ensemble's defining closed form
//   U = sum_x w^{f(x)} D |x_< ^ h1(x_>) || x_> ^ h2(x_< ^ h1(x_>))><x| C
// resolves the order this way; the two orderings agree in distribution.
inline Circuit build_lrfc(int n, const FunctionSample& f, const FunctionSample& h1,
                          const FunctionSample& h2, const Mat& C, const Mat& D) {
  if (n % 2) throw std::invalid_argument("build_lrfc: n must be even");
  if (unitary_defect(C) > 1e-9 || unitary_defect(D) > 1e-9)
    throw std::invalid_argument("build_lrfc: C and D must be unitary");
  Circuit c;
  c.num_qubits = n;
  c.push_layer({Gate::make_dense(C, all_qubits(n))});
  Gate gf;
  gf.kind = Gate::Kind::ternary_phase;
  gf.fn = f;
  gf.targets = all_qubits(n);
  c.push_layer({gf});
  Gate gl;
  gl.kind = Gate::Kind::shuffle_left;
  gl.fn = h1;
  gl.targets = all_qubits(n);
  c.push_layer({gl});
  Gate gr;
  gr.kind = Gate::Kind::shuffle_right;
  gr.fn = h2;
  gr.targets = all_qubits(n);
  c.push_layer({gr});
  c.push_layer({Gate::make_dense(D, all_qubits(n))});
  c.metadata = json{{"ensemble", "lrfc"}, {"n", n}};
  return c;
}

using BlockSampler = std::function<Mat(int64_t dim, Rng& rng)>;

inline BlockSampler haar_block_sampler() {
  return [](int64_t dim, Rng& rng) { return haar_unitary(dim, rng); };
}

// outer' . [bricks on patches (0,1),(2,3),...] . [bricks on (1,2),(3,4),...]
// . outer, open boundary (edge patches idle in the second inner layer).
inline Circuit build_two_layer(int n, int xi, const BlockSampler& inner,
                               const BlockSampler& outer, Rng& rng) {
  if (xi < 1 || n % xi != 0 || n / xi < 2)
    throw std::invalid_argument("build_two_layer: need xi | n and n/xi >= 2");
  const int m = n / xi;
  Circuit c;
  c.num_qubits = n;
  int stream = 0;
  auto draw = [&](const BlockSampler& s, int64_t dim) {
    Rng sub = rng.child(stream++);
    return s(dim, sub);
  };
  c.push_layer({Gate::make_dense(draw(outer, dim_of(n)), all_qubits(n))});
  for (int parity = 0; parity < 2; ++parity) {
    std::vector<Gate> layer;
    for (int p = parity; p + 1 < m; p += 2) {
      std::vector<int> targets;
      for (int q = p * xi; q < (p + 2) * xi; ++q) targets.push_back(q);
      layer.push_back(Gate::make_dense(draw(inner, dim_of(2 * xi)), targets));
    }
    c.push_layer(std::move(layer));
  }
  c.push_layer({Gate::make_dense(draw(outer, dim_of(n)), all_qubits(n))});
  c.metadata = json{{"ensemble", "two_layer"}, {"n", n}, {"xi", xi}};
  return c;
}

// Butterfly pairing: at layer d (1-based), patch i couples to patch
// i + 2^{d-1} within blocks of 2^d consecutive patches.  Light cones double
// every layer and cover the register after log2(n/xi) layers.
inline Circuit build_blocked_scrambler(int n, int xi, const BlockSampler& block, Rng& rng) {
  if (xi < 1 || n % xi != 0) throw std::invalid_argument("build_blocked_scrambler: xi must divide n");
  const int m = n / xi;
  if (m < 2 || (m & (m - 1)) != 0)
    throw std::invalid_argument("build_blocked_scrambler: patch count must be a power of 2");
  Circuit c;
  c.num_qubits = n;
  int stream = 0;
  for (int half = 1; half < m; half *= 2) {
    std::vector<Gate> layer;
    for (int blk = 0; blk < m; blk += 2 * half)
      for (int j = 0; j < half; ++j) {
        int p1 = blk + j, p2 = blk + j + half;
        std::vector<int> targets;
        for (int q = p1 * xi; q < (p1 + 1) * xi; ++q) targets.push_back(q);
        for (int q = p2 * xi; q < (p2 + 1) * xi; ++q) targets.push_back(q);
        Rng sub = rng.child(stream++);
        layer.push_back(Gate::make_dense(block(dim_of(2 * xi), sub), targets));
      }
    c.push_layer(std::move(layer));
  }
  c.metadata = json{{"ensemble", "blocked_scrambler"}, {"n", n}, {"xi", xi}};
  return c;
}

// Alternating even/odd nearest-neighbor layers of independent Haar 2-qubit
// gates.
inline Circuit build_brickwork_1d(int n, int depth, Rng& rng) {
  if (depth < 1) throw std::invalid_argument("build_brickwork_1d: depth must be >= 1");
  Circuit c;
  c.num_qubits = n;
  int stream = 0;
  for (int layer = 0; layer < depth; ++layer) {
    std::vector<Gate> gates;
    for (int q = layer % 2; q + 1 < n; q += 2) {
      Rng sub = rng.child(stream++);
      gates.push_back(Gate::make_dense(haar_unitary(4, sub), {q, q + 1}));
    }
    c.push_layer(std::move(gates));
  }
  c.metadata = json{{"ensemble", "brickwork1d"}, {"n", n}, {"depth", depth}};
  return c;
}

// ---------------------------------------------------------------------------
// EnsembleSpec: declarative description + seeded sampling
// ---------------------------------------------------------------------------

struct EnsembleSpec {
  enum class Variant { haar, lrfc, two_layer, blocked_scrambler, brickwork1d };
  Variant variant = Variant::haar;
  int n = 2;
  int xi = 1;      // two_layer / blocked_scrambler
  int depth = 1;   // brickwork1d
  // lrfc function backends: "table" or "poly"; poly uses this k.
  std::string function_backend = "table";
  int k = 2;

  static EnsembleSpec from_json(const json& j) {
    EnsembleSpec s;
    std::string v = j.at("variant").get<std::string>();
    if (v == "haar") s.variant = Variant::haar;
    else if (v == "lrfc") s.variant = Variant::lrfc;
    else if (v == "two_layer") s.variant = Variant::two_layer;
    else if (v == "blocked_scrambler") s.variant = Variant::blocked_scrambler;
    else if (v == "brickwork1d") s.variant = Variant::brickwork1d;
    else throw std::invalid_argument("EnsembleSpec: unknown variant " + v);
    s.n = j.at("n").get<int>();
    if (j.contains("xi")) s.xi = j.at("xi").get<int>();
    if (j.contains("depth")) s.depth = j.at("depth").get<int>();
    if (j.contains("function_backend")) s.function_backend = j.at("function_backend").get<std::string>();
    if (j.contains("k")) s.k = j.at("k").get<int>();
    return s;
  }

  json to_json() const {
    const char* names[] = {"haar", "lrfc", "two_layer", "blocked_scrambler", "brickwork1d"};
    json j{{"variant", names[int(variant)]}, {"n", n}};
    if (variant == Variant::two_layer || variant == Variant::blocked_scrambler) j["xi"] = xi;
    if (variant == Variant::brickwork1d) j["depth"] = depth;
    if (variant == Variant::lrfc) {
      j["function_backend"] = function_backend;
      j["k"] = k;
    }
    return j;
  }
};

inline Circuit sample_circuit(const EnsembleSpec& spec, uint64_t seed) {
  Rng rng(seed);
  Circuit c;
  switch (spec.variant) {
    case EnsembleSpec::Variant::haar: {
      c.num_qubits = spec.n;
      Rng sub = rng.child(0);
      c.push_layer({Gate::make_dense(haar_unitary(dim_of(spec.n), sub), all_qubits(spec.n))});
      c.metadata = json{{"ensemble", "haar"}, {"n", spec.n}};
      break;
    }
    case EnsembleSpec::Variant::lrfc: {
      kwise::FunctionFamily tern{spec.n, kwise::Range::ternary, 0, kwise::Backend::table, 1};
      kwise::FunctionFamily shuf;
      shuf.domain_bits = spec.n / 2;
      shuf.range = kwise::Range::bits;
      shuf.range_bits = spec.n / 2;
      if (spec.function_backend == "poly") {
        shuf.backend = kwise::Backend::poly;
        shuf.k = spec.k;
      } else {
        shuf.backend = kwise::Backend::table;
      }
      Rng r0 = rng.child(0), r1 = rng.child(1), r2 = rng.child(2), r3 = rng.child(3), r4 = rng.child(4);
      auto f = kwise::sample_function(tern, r0);
      auto h1 = kwise::sample_function(shuf, r1);
      auto h2 = kwise::sample_function(shuf, r2);
      Mat C = haar_unitary(dim_of(spec.n), r3);
      Mat D = haar_unitary(dim_of(spec.n), r4);
      c = build_lrfc(spec.n, f, h1, h2, C, D);
      c.metadata["function_backend"] = spec.function_backend;
      break;
    }
    case EnsembleSpec::Variant::two_layer:
      c = build_two_layer(spec.n, spec.xi, haar_block_sampler(), haar_block_sampler(), rng);
      break;
    case EnsembleSpec::Variant::blocked_scrambler:
      c = build_blocked_scrambler(spec.n, spec.xi, haar_block_sampler(), rng);
      break;
    case EnsembleSpec::Variant::brickwork1d:
      c = build_brickwork_1d(spec.n, spec.depth, rng);
      break;
  }
  c.metadata["seed"] = seed;
  return c;
}

// ---------------------------------------------------------------------------
// Serialization: {n, layers:[{gates:[{kind, targets, payload-ref}]}], metadata}
// ---------------------------------------------------------------------------

inline json circuit_to_json(const Circuit& c, BlobStore& store) {
  json layers = json::array();
  for (const auto& layer : c.layers) {
    json gates = json::array();
    for (const auto& g : layer) {
      json gj;
      switch (g.kind) {
        case Gate::Kind::dense:
          gj["kind"] = "dense";
          gj["payload_ref"] = store.put(g.payload);
          break;
        case Gate::Kind::shuffle_left:
          gj["kind"] = "shuffle_left";
          gj["fn"] = kwise::to_json(g.fn);
          break;
        case Gate::Kind::shuffle_right:
          gj["kind"] = "shuffle_right";
          gj["fn"] = kwise::to_json(g.fn);
          break;
        case Gate::Kind::ternary_phase:
          gj["kind"] = "ternary_phase";
          gj["fn"] = kwise::to_json(g.fn);
          break;
      }
      gj["targets"] = g.targets;
      gates.push_back(gj);
    }
    layers.push_back(json{{"gates", gates}});
  }
  return json{{"n", c.num_qubits}, {"layers", layers}, {"metadata", c.metadata}};
}

inline Circuit circuit_from_json(const json& j, const BlobStore& store) {
  Circuit c;
  c.num_qubits = j.at("n").get<int>();
  for (const auto& lj : j.at("layers")) {
    std::vector<Gate> gates;
    for (const auto& gj : lj.at("gates")) {
      Gate g;
      std::string kind = gj.at("kind").get<std::string>();
      g.targets = gj.at("targets").get<std::vector<int>>();
      if (kind == "dense") {
        g.kind = Gate::Kind::dense;
        g.payload = store.get(gj.at("payload_ref").get<std::string>());
      } else {
        g.fn = kwise::function_from_json(gj.at("fn"));
        if (kind == "shuffle_left") g.kind = Gate::Kind::shuffle_left;
        else if (kind == "shuffle_right") g.kind = Gate::Kind::shuffle_right;
        else if (kind == "ternary_phase") g.kind = Gate::Kind::ternary_phase;
        else throw std::invalid_argument("circuit_from_json: unknown kind " + kind);
      }
      gates.push_back(std::move(g));
    }
    c.push_layer(std::move(gates));
  }
  c.metadata = j.value("metadata", json::object());
  return c;
}

}  // namespace haarlab::circuits
