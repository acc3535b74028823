#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "haarlab/circuits.hpp"
#include "haarlab/linalg.hpp"
#include "haarlab/weingarten.hpp"

namespace haarlab::pr {

// ---------------------------------------------------------------------------
// Relations and relation states
// ---------------------------------------------------------------------------

// Multiset of (x, y) pairs kept sorted; the sorted encoding is the canonical
// key realizing the symmetrized relation-state basis.
struct Relation {
  std::vector<std::pair<uint32_t, uint32_t>> pairs;

  int size() const { return static_cast<int>(pairs.size()); }

  Relation with(uint32_t x, uint32_t y) const {
    Relation r = *this;
    auto it = std::lower_bound(r.pairs.begin(), r.pairs.end(), std::make_pair(x, y));
    r.pairs.insert(it, {x, y});
    return r;
  }

  Relation without(size_t index) const {
    Relation r = *this;
    r.pairs.erase(r.pairs.begin() + index);
    return r;
  }

  bool operator==(const Relation& o) const { return pairs == o.pairs; }
  bool operator<(const Relation& o) const { return pairs < o.pairs; }
};

inline bool im_contains(const Relation& a, const Relation& b, uint32_t y) {
  for (auto [px, py] : a.pairs)
    if (py == y) return true;
  for (auto [px, py] : b.pairs)
    if (py == y) return true;
  return false;
}

inline bool dom_contains(const Relation& a, const Relation& b, uint32_t x) {
  for (auto [px, py] : a.pairs)
    if (px == x) return true;
  for (auto [px, py] : b.pairs)
    if (px == x) return true;
  return false;
}

// |Im(L u R)| counting distinct values.
inline int im_size(const Relation& a, const Relation& b) {
  std::vector<uint32_t> v;
  for (auto [x, y] : a.pairs) v.push_back(y);
  for (auto [x, y] : b.pairs) v.push_back(y);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return static_cast<int>(v.size());
}

inline int dom_size(const Relation& a, const Relation& b) {
  std::vector<uint32_t> v;
  for (auto [x, y] : a.pairs) v.push_back(x);
  for (auto [x, y] : b.pairs) v.push_back(x);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return static_cast<int>(v.size());
}

struct BasisKey {
  uint32_t sys = 0;
  uint32_t anc = 0;
  Relation L, R;

  bool operator==(const BasisKey& o) const {
    return sys == o.sys && anc == o.anc && L == o.L && R == o.R;
  }
};

struct BasisKeyHash {
  size_t operator()(const BasisKey& k) const {
    uint64_t h = Rng::mix(uint64_t(k.sys) << 32 | k.anc);
    for (auto [x, y] : k.L.pairs) h = Rng::mix(h ^ (uint64_t(x) << 32 | y) ^ 0x1111);
    for (auto [x, y] : k.R.pairs) h = Rng::mix(h ^ (uint64_t(x) << 32 | y) ^ 0x2222);
    return size_t(h);
  }
};

// Sparse amplitude map over (system, ancilla, L, R).  Components with
// different (|L|, |R|) never interfere (variable-length orthogonality).
struct RelationState {
  int n = 1;
  int m = 0;
  std::unordered_map<BasisKey, cplx, BasisKeyHash> amps;

  int64_t N() const { return int64_t(1) << n; }

  double norm() const {
    double s = 0.0;
    for (const auto& [k, a] : amps) s += std::norm(a);
    return std::sqrt(s);
  }

  void prune(double threshold = 1e-14) {
    for (auto it = amps.begin(); it != amps.end();) {
      if (std::abs(it->second) < threshold)
        it = amps.erase(it);
      else
        ++it;
    }
  }

  static RelationState initial(int n, int m) {
    RelationState s;
    s.n = n;
    s.m = m;
    s.amps[BasisKey{}] = 1.0;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Primitive partial isometries V^L, V^R and conjugated variants.  The barred
// versions differ from the unbarred ones by swapping the roles of the L and R
// registers.
// ---------------------------------------------------------------------------

namespace detail {

enum class Prim { VL, VR, VLdag, VRdag, VbarL, VbarR, VbarLdag, VbarRdag };

inline void add(RelationState& out, BasisKey key, cplx amp) {
  auto [it, fresh] = out.amps.try_emplace(std::move(key), amp);
  if (!fresh) it->second += amp;
}

inline RelationState apply_prim(const RelationState& in, Prim prim) {
  RelationState out;
  out.n = in.n;
  out.m = in.m;
  const int64_t N = in.N();
  const double capacity = double(N);
  for (const auto& [key, amp] : in.amps) {
    switch (prim) {
      case Prim::VL:      // |x> -> sum_{y not in Im} |y>, L += (x, y)
      case Prim::VbarL: { // same but records into R
        if (key.L.size() + key.R.size() >= capacity)
          throw std::runtime_error("path-recording: relation capacity exceeded");
        int im = im_size(key.L, key.R);
        double w = 1.0 / std::sqrt(double(N - im));
        for (uint32_t y = 0; y < uint32_t(N); ++y) {
          if (im_contains(key.L, key.R, y)) continue;
          BasisKey nk = key;
          nk.sys = y;
          if (prim == Prim::VL)
            nk.L = key.L.with(key.sys, y);
          else
            nk.R = key.R.with(key.sys, y);
          add(out, std::move(nk), amp * w);
        }
        break;
      }
      case Prim::VR:      // |y> -> sum_{x not in Dom} |x>, R += (x, y)
      case Prim::VbarR: { // same but records into L
        if (key.L.size() + key.R.size() >= capacity)
          throw std::runtime_error("path-recording: relation capacity exceeded");
        int dom = dom_size(key.L, key.R);
        double w = 1.0 / std::sqrt(double(N - dom));
        for (uint32_t x = 0; x < uint32_t(N); ++x) {
          if (dom_contains(key.L, key.R, x)) continue;
          BasisKey nk = key;
          nk.sys = x;
          if (prim == Prim::VR)
            nk.R = key.R.with(x, key.sys);
          else
            nk.L = key.L.with(x, key.sys);
          add(out, std::move(nk), amp * w);
        }
        break;
      }
      case Prim::VLdag: {  // remove (x, sys) from L when sys fresh afterwards
        for (size_t i = 0; i < key.L.pairs.size(); ++i) {
          auto [x, y] = key.L.pairs[i];
          if (y != key.sys) continue;
          Relation rest = key.L.without(i);
          if (im_contains(rest, key.R, y)) continue;
          double w = 1.0 / std::sqrt(double(N - im_size(rest, key.R)));
          BasisKey nk = key;
          nk.sys = x;
          nk.L = std::move(rest);
          add(out, std::move(nk), amp * w);
        }
        break;
      }
      case Prim::VbarLdag: {  // mirror: removes from R
        for (size_t i = 0; i < key.R.pairs.size(); ++i) {
          auto [x, y] = key.R.pairs[i];
          if (y != key.sys) continue;
          Relation rest = key.R.without(i);
          if (im_contains(key.L, rest, y)) continue;
          double w = 1.0 / std::sqrt(double(N - im_size(key.L, rest)));
          BasisKey nk = key;
          nk.sys = x;
          nk.R = std::move(rest);
          add(out, std::move(nk), amp * w);
        }
        break;
      }
      case Prim::VRdag: {  // remove (sys, y) from R when sys fresh afterwards
        for (size_t i = 0; i < key.R.pairs.size(); ++i) {
          auto [x, y] = key.R.pairs[i];
          if (x != key.sys) continue;
          Relation rest = key.R.without(i);
          if (dom_contains(key.L, rest, x)) continue;
          double w = 1.0 / std::sqrt(double(N - dom_size(key.L, rest)));
          BasisKey nk = key;
          nk.sys = y;
          nk.R = std::move(rest);
          add(out, std::move(nk), amp * w);
        }
        break;
      }
      case Prim::VbarRdag: {  // mirror: removes from L
        for (size_t i = 0; i < key.L.pairs.size(); ++i) {
          auto [x, y] = key.L.pairs[i];
          if (x != key.sys) continue;
          Relation rest = key.L.without(i);
          if (dom_contains(rest, key.R, x)) continue;
          double w = 1.0 / std::sqrt(double(N - dom_size(rest, key.R)));
          BasisKey nk = key;
          nk.sys = y;
          nk.L = std::move(rest);
          add(out, std::move(nk), amp * w);
        }
        break;
      }
    }
  }
  out.prune();
  return out;
}

inline RelationState lin_sub(const RelationState& a, const RelationState& b) {
  RelationState out = a;
  for (const auto& [k, amp] : b.amps) add(out, k, -amp);
  out.prune();
  return out;
}

inline RelationState lin_add(const RelationState& a, const RelationState& b) {
  RelationState out = a;
  for (const auto& [k, amp] : b.amps) add(out, k, amp);
  out.prune();
  return out;
}

}  // namespace detail

// V = V^L (Id - V^R V^{R,dag}) + (Id - V^L V^{L,dag}) V^{R,dag}
inline RelationState apply_V(const RelationState& psi) {
  using namespace detail;
  RelationState u = apply_prim(psi, Prim::VRdag);
  RelationState w = lin_sub(psi, apply_prim(u, Prim::VR));
  RelationState out1 = apply_prim(w, Prim::VL);
  RelationState out2 = lin_sub(u, apply_prim(apply_prim(u, Prim::VLdag), Prim::VL));
  return lin_add(out1, out2);
}

// V^dag = (Id - V^R V^{R,dag}) V^{L,dag} + V^R (Id - V^L V^{L,dag})
inline RelationState apply_V_dag(const RelationState& psi) {
  using namespace detail;
  RelationState a = apply_prim(psi, Prim::VLdag);
  RelationState out1 = lin_sub(a, apply_prim(apply_prim(a, Prim::VRdag), Prim::VR));
  RelationState out2 =
      apply_prim(lin_sub(psi, apply_prim(apply_prim(psi, Prim::VLdag), Prim::VL)), Prim::VR);
  return lin_add(out1, out2);
}

inline RelationState apply_Vbar(const RelationState& psi) {
  using namespace detail;
  RelationState u = apply_prim(psi, Prim::VbarRdag);
  RelationState w = lin_sub(psi, apply_prim(u, Prim::VbarR));
  RelationState out1 = apply_prim(w, Prim::VbarL);
  RelationState out2 = lin_sub(u, apply_prim(apply_prim(u, Prim::VbarLdag), Prim::VbarL));
  return lin_add(out1, out2);
}

inline RelationState apply_Vbar_dag(const RelationState& psi) {
  using namespace detail;
  RelationState a = apply_prim(psi, Prim::VbarLdag);
  RelationState out1 = lin_sub(a, apply_prim(apply_prim(a, Prim::VbarRdag), Prim::VbarR));
  RelationState out2 = apply_prim(
      lin_sub(psi, apply_prim(apply_prim(psi, Prim::VbarLdag), Prim::VbarL)), Prim::VbarR);
  return lin_add(out1, out2);
}

// Swaps the roles of the L and R registers (the conjugation symmetry of Vbar).
inline RelationState swap_LR(const RelationState& psi) {
  RelationState out;
  out.n = psi.n;
  out.m = psi.m;
  for (const auto& [k, a] : psi.amps) {
    BasisKey nk = k;
    std::swap(nk.L, nk.R);
    out.amps[nk] = a;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adversary programs
// ---------------------------------------------------------------------------

enum class QueryType { fwd, inv, conj, transp };

inline QueryType query_from_string(const std::string& s) {
  if (s == "fwd") return QueryType::fwd;
  if (s == "inv") return QueryType::inv;
  if (s == "conj") return QueryType::conj;
  if (s == "transp") return QueryType::transp;
  throw std::invalid_argument("unknown query type: " + s);
}

struct AdversaryProgram {
  int n = 2;
  int m = 0;
  std::vector<QueryType> queries;
  std::vector<Mat> unitaries;  // W_1 .. W_{t+1}, each 2^{n+m} x 2^{n+m}

  int t() const { return static_cast<int>(queries.size()); }

  void validate() const {
    if (int(unitaries.size()) != t() + 1)
      throw std::invalid_argument("AdversaryProgram: need t+1 interleaving unitaries");
    for (const auto& w : unitaries) {
      if (w.rows() != dim_of(n + m)) throw std::invalid_argument("AdversaryProgram: W size mismatch");
      if (unitary_defect(w) > 1e-9) throw std::invalid_argument("AdversaryProgram: W not unitary");
    }
  }

  // Random program with Haar interleaving unitaries.
  static AdversaryProgram random(int n, int m, const std::vector<QueryType>& queries,
                                 uint64_t seed) {
    AdversaryProgram p;
    p.n = n;
    p.m = m;
    p.queries = queries;
    for (size_t i = 0; i <= queries.size(); ++i) {
      Rng sub(Rng::derive(seed, i));
      p.unitaries.push_back(haar_unitary(dim_of(n + m), sub));
    }
    return p;
  }
};

inline AdversaryProgram program_from_json(const json& j, const BlobStore& store) {
  AdversaryProgram p;
  p.n = j.at("n").get<int>();
  p.m = j.at("m").get<int>();
  for (const auto& q : j.at("queries")) p.queries.push_back(query_from_string(q.get<std::string>()));
  for (const auto& ref : j.at("unitaries")) p.unitaries.push_back(store.get(ref.get<std::string>()));
  if (j.contains("t") && j.at("t").get<int>() != p.t())
    throw std::invalid_argument("program_from_json: t does not match queries");
  p.validate();
  return p;
}

inline json program_to_json(const AdversaryProgram& p, BlobStore& store) {
  json j{{"n", p.n}, {"m", p.m}, {"t", p.t()}};
  json qs = json::array();
  static const char* names[] = {"fwd", "inv", "conj", "transp"};
  for (auto q : p.queries) qs.push_back(names[int(q)]);
  j["queries"] = qs;
  json us = json::array();
  for (const auto& w : p.unitaries) us.push_back(store.put(w));
  j["unitaries"] = us;
  return j;
}

// ---------------------------------------------------------------------------
// Path-recording oracle run
// ---------------------------------------------------------------------------

// W acts on (system, ancilla) for each fixed (L, R) group.
inline RelationState apply_W(const RelationState& psi, const Mat& W) {
  const int64_t d = dim_of(psi.n + psi.m);
  if (W.rows() != d) throw std::invalid_argument("apply_W: dimension mismatch");
  std::map<std::pair<Relation, Relation>, Vec> groups;
  for (const auto& [k, a] : psi.amps) {
    auto key = std::make_pair(k.L, k.R);
    auto it = groups.find(key);
    if (it == groups.end()) it = groups.emplace(key, Vec::Zero(d)).first;
    it->second(int64_t(k.sys) * dim_of(psi.m) + k.anc) += a;
  }
  RelationState out;
  out.n = psi.n;
  out.m = psi.m;
  const int64_t manc = dim_of(psi.m);
  for (auto& [lr, vec] : groups) {
    Vec w = W * vec;
    for (int64_t i = 0; i < d; ++i) {
      if (std::abs(w(i)) < 1e-14) continue;
      BasisKey k;
      k.sys = uint32_t(i / manc);
      k.anc = uint32_t(i % manc);
      k.L = lr.first;
      k.R = lr.second;
      out.amps[std::move(k)] = w(i);
    }
  }
  return out;
}

// Reduced density matrix on (system, ancilla) after tracing out L, R.
inline Mat reduced_density(const RelationState& psi) {
  const int64_t d = dim_of(psi.n + psi.m);
  const int64_t manc = dim_of(psi.m);
  std::map<std::pair<Relation, Relation>, Vec> groups;
  for (const auto& [k, a] : psi.amps) {
    auto key = std::make_pair(k.L, k.R);
    auto it = groups.find(key);
    if (it == groups.end()) it = groups.emplace(key, Vec::Zero(d)).first;
    it->second(int64_t(k.sys) * manc + k.anc) += a;
  }
  Mat rho = Mat::Zero(d, d);
  for (auto& [lr, v] : groups) rho += v * v.adjoint();
  return rho;
}

inline RelationState run_path_recording(const AdversaryProgram& p,
                                        size_t component_limit = 3'000'000) {
  p.validate();
  RelationState state = RelationState::initial(p.n, p.m);
  state = apply_W(state, p.unitaries[0]);
  for (int i = 0; i < p.t(); ++i) {
    switch (p.queries[i]) {
      case QueryType::fwd:
        state = apply_V(state);
        break;
      case QueryType::inv:
        state = apply_V_dag(state);
        break;
      case QueryType::conj:
        state = apply_Vbar(state);
        break;
      case QueryType::transp:
        state = apply_Vbar_dag(state);
        break;
    }
    if (state.amps.size() > component_limit)
      throw std::runtime_error("run_path_recording: component limit exceeded");
    state = apply_W(state, p.unitaries[i + 1]);
  }
  return state;
}

// Closed form of the reduced output for the two-query forward-forward program
// with no ancilla: with psi = W1|0>, u = W2^dag psi,
//   rho = W3 [ I/N + (u u^dag - diag|u|^2) / (N(N-1)) ] W3^dag.
// Cross-checked against the sparse engine in the unit tests.
inline Mat path_recording_ff2_closed(const AdversaryProgram& p) {
  if (p.m != 0 || p.t() != 2 || p.queries[0] != QueryType::fwd || p.queries[1] != QueryType::fwd)
    throw std::invalid_argument("path_recording_ff2_closed: program shape mismatch");
  const int64_t N = dim_of(p.n);
  Vec psi = p.unitaries[0].col(0);
  Vec u = p.unitaries[1].adjoint() * psi;
  Mat rho = Mat::Identity(N, N) / double(N);
  double w = 1.0 / (double(N) * double(N - 1));
  rho += w * (u * u.adjoint());
  for (int64_t i = 0; i < N; ++i) rho(i, i) -= w * std::norm(u(i));
  return p.unitaries[2] * rho * p.unitaries[2].adjoint();
}

// ---------------------------------------------------------------------------
// Exact Haar oracle: Weingarten wire-sum over the query-unrolled experiment.
// Each query contributes one U-type and one Ubar-type matrix factor; the
// Haar moment pairs them through all row/column bijections with Weingarten
// weights.
// ---------------------------------------------------------------------------

namespace detail {

struct WireSlots {
  // slot ids: per query i, ket_out = 4i, ket_in = 4i+1, bra_out = 4i+2,
  // bra_in = 4i+3
  static int ket_out(int i) { return 4 * i; }
  static int ket_in(int i) { return 4 * i + 1; }
  static int bra_out(int i) { return 4 * i + 2; }
  static int bra_in(int i) { return 4 * i + 3; }
};

struct Factor {
  int row_slot;
  int col_slot;
};

// U-type and Ubar-type factors with their wire slots.
inline void build_factors(const std::vector<QueryType>& queries, std::vector<Factor>& ufac,
                          std::vector<Factor>& barfac) {
  using WS = WireSlots;
  for (int i = 0; i < int(queries.size()); ++i) {
    switch (queries[i]) {
      case QueryType::fwd:  // ket U_{ab}: out=a(row), in=b(col); bra conj(U_{a'b'})
        ufac.push_back({WS::ket_out(i), WS::ket_in(i)});
        barfac.push_back({WS::bra_out(i), WS::bra_in(i)});
        break;
      case QueryType::transp:  // ket U_{ab} with out=b(col), in=a(row)
        ufac.push_back({WS::ket_in(i), WS::ket_out(i)});
        barfac.push_back({WS::bra_in(i), WS::bra_out(i)});
        break;
      case QueryType::conj:  // ket Ubar_{cd}: out=c(row), in=d(col); bra U
        barfac.push_back({WS::ket_out(i), WS::ket_in(i)});
        ufac.push_back({WS::bra_out(i), WS::bra_in(i)});
        break;
      case QueryType::inv:  // ket Ubar_{cd} with out=d(col), in=c(row); bra U
        barfac.push_back({WS::ket_in(i), WS::ket_out(i)});
        ufac.push_back({WS::bra_in(i), WS::bra_out(i)});
        break;
    }
  }
}

}  // namespace detail

// Exact expected output density matrix on (system, ancilla) for a Haar-random
// oracle.  Cost ~ N^{2t} * 4^m; feasible for t=1 (n <= 10), t=2 (n <= 6),
// t=3 (n <= 4), t=4 (n <= 3).
inline Mat exact_haar_reduced(const AdversaryProgram& p) {
  p.validate();
  const int t = p.t();
  if (t == 0) {
    Vec v = p.unitaries[0].col(0);
    return v * v.adjoint();
  }
  if (t > 4) throw std::invalid_argument("exact_haar_reduced: t <= 4 required");
  const int64_t N = dim_of(p.n);
  const int64_t A = dim_of(p.m);
  double contraction_cost = std::pow(double(N), 2 * t) * double(A) * double(A);
  double tensor_size = std::pow(double(N), 2 * t - 1) * double(A);
  if (contraction_cost > 5e8 || tensor_size > 5e7)
    throw std::invalid_argument("exact_haar_reduced: size limit exceeded");

  // Ket tensor after all t queries: M[anc; w_1 .. w_{2t-1}] with stored wires
  // (ket_in_1, ket_out_1, ket_in_2, ..., ket_out_{t-1}, ket_in_t); the final
  // system content is the free wire ket_out_t.
  //
  // Layout: index = ((w_1 * N + w_2) * N + ...) * A + anc.
  int64_t cur_wires = 0;
  std::vector<cplx> M(static_cast<size_t>(A));
  {
    Vec psi0 = p.unitaries[0].col(0);
    // consume sys as ket_in_1
    M.assign(size_t(N * A), cplx(0, 0));
    for (int64_t s = 0; s < N; ++s)
      for (int64_t b = 0; b < A; ++b) M[size_t(s * A + b)] = psi0(s * A + b);
    cur_wires = 1;
  }
  for (int i = 1; i < t; ++i) {
    // apply W_{i+1}: M'[anc'; stored, o, in_{i+1}] =
    //   sum_b W[(in,anc'),(o,b)] M[b; stored]
    int64_t stored = 1;
    for (int64_t w = 0; w < cur_wires; ++w) stored *= N;
    std::vector<cplx> next(size_t(stored * N * N * A), cplx(0, 0));
    const Mat& W = p.unitaries[i];
    for (int64_t st = 0; st < stored; ++st)
      for (int64_t o = 0; o < N; ++o)
        for (int64_t in = 0; in < N; ++in)
          for (int64_t a2 = 0; a2 < A; ++a2) {
            cplx acc = 0.0;
            for (int64_t b = 0; b < A; ++b)
              acc += W(in * A + a2, o * A + b) * M[size_t(st * A + b)];
            next[size_t((((st * N) + o) * N + in) * A + a2)] = acc;
          }
    M.swap(next);
    cur_wires += 2;
  }

  // Wire matching per (pi, sigma).
  std::vector<detail::Factor> ufac, barfac;
  detail::build_factors(p.queries, ufac, barfac);
  wg::WeingartenTable table = wg::weingarten_table(t, double(N));

  // Stored-wire strides in the ket/bra tensors (slot id -> stride, 0 if not
  // stored).  Stored order: ket_in_1, ket_out_1, ..., ket_in_t.
  std::vector<int64_t> ket_stride(4 * t, 0);
  {
    std::vector<int> order{detail::WireSlots::ket_in(0)};
    for (int i = 1; i < t; ++i) {
      order.push_back(detail::WireSlots::ket_out(i - 1));
      order.push_back(detail::WireSlots::ket_in(i));
    }
    int64_t stride = A;
    for (int j = int(order.size()) - 1; j >= 0; --j) {
      ket_stride[order[j]] = stride;
      stride *= N;
    }
  }
  std::vector<int64_t> bra_stride(4 * t, 0);
  for (int i = 0; i < t; ++i) {
    bra_stride[detail::WireSlots::bra_in(i)] = ket_stride[detail::WireSlots::ket_in(i)];
    if (i > 0)
      bra_stride[detail::WireSlots::bra_out(i - 1)] = ket_stride[detail::WireSlots::ket_out(i - 1)];
  }

  const int ket_free = detail::WireSlots::ket_out(t - 1);
  const int bra_free = detail::WireSlots::bra_out(t - 1);

  Mat rho = Mat::Zero(N * A, N * A);
  auto perms = table.perms;
  for (const auto& pi : perms)
    for (const auto& sigma : perms) {
      double weight = table.wg_of(pi.after(sigma.inverse()));
      // union groups of slots under the matching
      std::vector<int> parent(4 * t);
      std::iota(parent.begin(), parent.end(), 0);
      std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
      };
      auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
      for (int i = 0; i < t; ++i) {
        unite(ufac[i].row_slot, barfac[pi.images[i]].row_slot);
        unite(ufac[i].col_slot, barfac[sigma.images[i]].col_slot);
      }
      // group list
      std::map<int, int> group_id;
      for (int s = 0; s < 4 * t; ++s) {
        int r = find(s);
        if (!group_id.count(r)) group_id[r] = int(group_id.size());
      }
      const int ngroups = int(group_id.size());
      std::vector<int64_t> gket(ngroups, 0), gbra(ngroups, 0);
      for (int s = 0; s < 4 * t; ++s) {
        gket[group_id[find(s)]] += ket_stride[s];
        gbra[group_id[find(s)]] += bra_stride[s];
      }
      int g_ket_free = group_id[find(ket_free)];
      int g_bra_free = group_id[find(bra_free)];
      // free groups: all others
      std::vector<int> free_groups;
      for (int g = 0; g < ngroups; ++g)
        if (g != g_ket_free && g != g_bra_free) free_groups.push_back(g);

      const int nf = int(free_groups.size());
      std::vector<int64_t> val(nf, 0);
      for (int64_t o = 0; o < N; ++o) {
        for (int64_t o2 = 0; o2 < N; ++o2) {
          if (g_ket_free == g_bra_free && o2 != o) continue;
          int64_t base_ket = o * gket[g_ket_free];
          int64_t base_bra = o * gbra[g_ket_free];
          if (g_bra_free != g_ket_free) {
            base_ket += o2 * gket[g_bra_free];
            base_bra += o2 * gbra[g_bra_free];
          }
          // odometer over free group values
          std::fill(val.begin(), val.end(), 0);
          int64_t ket_idx = base_ket, bra_idx = base_bra;
          while (true) {
            for (int64_t b = 0; b < A; ++b)
              for (int64_t b2 = 0; b2 < A; ++b2) {
                cplx term = M[size_t(ket_idx + b)] * std::conj(M[size_t(bra_idx + b2)]);
                rho(o * A + b, o2 * A + b2) += weight * term;
              }
            int g = 0;
            for (; g < nf; ++g) {
              ket_idx += gket[free_groups[g]];
              bra_idx += gbra[free_groups[g]];
              if (++val[g] < N) break;
              ket_idx -= N * gket[free_groups[g]];
              bra_idx -= N * gbra[free_groups[g]];
              val[g] = 0;
            }
            if (g == nf) break;
          }
        }
      }
    }
  return p.unitaries[t] * rho * p.unitaries[t].adjoint();
}

// Exact Haar output for the forward-forward two-query program with no
// ancilla:
//   rho'' = [N/(N^2-1) - 2/(N(N^2-1))] I + u u^dag / (N^2-1),  u = W2^dag psi.
inline Mat exact_haar_ff2_closed(const AdversaryProgram& p) {
  if (p.m != 0 || p.t() != 2 || p.queries[0] != QueryType::fwd || p.queries[1] != QueryType::fwd)
    throw std::invalid_argument("exact_haar_ff2_closed: program shape mismatch");
  const double N = double(dim_of(p.n));
  Vec psi = p.unitaries[0].col(0);
  Vec u = p.unitaries[1].adjoint() * psi;
  Mat rho = (N / (N * N - 1) - 2.0 / (N * (N * N - 1))) *
            Mat::Identity(psi.size(), psi.size());
  rho += (u * u.adjoint()) / (N * N - 1);
  return p.unitaries[2] * rho * p.unitaries[2].adjoint();
}

// ---------------------------------------------------------------------------
// Monte-Carlo and ensemble oracles
// ---------------------------------------------------------------------------

inline Vec run_chain_with_unitary(const AdversaryProgram& p, const Mat& U) {
  StateVector s = StateVector::zero(p.n + p.m);
  std::vector<int> sys_qubits;
  for (int q = 0; q < p.n; ++q) sys_qubits.push_back(q);
  apply_gate_inplace(s, p.unitaries[0], circuits::all_qubits(p.n + p.m));
  for (int i = 0; i < p.t(); ++i) {
    Mat op;
    switch (p.queries[i]) {
      case QueryType::fwd: op = U; break;
      case QueryType::inv: op = U.adjoint(); break;
      case QueryType::conj: op = U.conjugate(); break;
      case QueryType::transp: op = U.transpose(); break;
    }
    apply_gate_inplace(s, op, sys_qubits);
    apply_gate_inplace(s, p.unitaries[i + 1], circuits::all_qubits(p.n + p.m));
  }
  return s.amps;
}

inline Mat haar_mc_reduced(const AdversaryProgram& p, int samples, uint64_t seed) {
  p.validate();
  const int64_t d = dim_of(p.n + p.m);
  Mat rho = Mat::Zero(d, d);
  for (int s = 0; s < samples; ++s) {
    Rng rng(Rng::derive(seed, s));
    Mat U = haar_unitary(dim_of(p.n), rng);
    Vec v = run_chain_with_unitary(p, U);
    rho += v * v.adjoint();
  }
  return rho / double(samples);
}

inline Mat ensemble_reduced(const AdversaryProgram& p, const circuits::EnsembleSpec& spec,
                            int samples, uint64_t seed) {
  p.validate();
  if (spec.n != p.n) throw std::invalid_argument("ensemble_reduced: qubit count mismatch");
  const int64_t d = dim_of(p.n + p.m);
  Mat rho = Mat::Zero(d, d);
  for (int s = 0; s < samples; ++s) {
    Mat U = circuits::dense_matrix(circuits::sample_circuit(spec, Rng::derive(seed, s)));
    Vec v = run_chain_with_unitary(p, U);
    rho += v * v.adjoint();
  }
  return rho / double(samples);
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

struct OracleSpec {
  enum class Kind { path_recording, exact_haar, haar_monte_carlo, ensemble };
  Kind kind = Kind::path_recording;
  int samples = 1000;
  uint64_t seed = 1;
  circuits::EnsembleSpec ensemble;
};

inline Mat run_adversary(const AdversaryProgram& p, const OracleSpec& oracle) {
  switch (oracle.kind) {
    case OracleSpec::Kind::path_recording: {
      bool ff2 = p.t() == 2 && p.m == 0 && p.queries[0] == QueryType::fwd &&
                 p.queries[1] == QueryType::fwd;
      if (ff2 && p.n >= 7) return path_recording_ff2_closed(p);
      return reduced_density(run_path_recording(p));
    }
    case OracleSpec::Kind::exact_haar: {
      bool ff2 = p.t() == 2 && p.m == 0 && p.queries[0] == QueryType::fwd &&
                 p.queries[1] == QueryType::fwd;
      if (ff2 && p.n >= 7) return exact_haar_ff2_closed(p);
      return exact_haar_reduced(p);
    }
    case OracleSpec::Kind::haar_monte_carlo:
      return haar_mc_reduced(p, oracle.samples, oracle.seed);
    case OracleSpec::Kind::ensemble:
      return ensemble_reduced(p, oracle.ensemble, oracle.samples, oracle.seed);
  }
  throw std::logic_error("run_adversary: unreachable");
}

}  // namespace haarlab::pr
