#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "haarlab/weingarten.hpp"

namespace haarlab::brauer {

using wg::Permutation;

// Operators live on p "left" copies (acted on by U) and q "right" copies
// (acted on by U*), each of local dimension D.  Leg indexing: left copy a is
// digit a, right copy b is digit p+b; digit 0 is the most significant base-D
// digit of the matrix index.  D is an arbitrary integer >= 2 here, not
// necessarily a power of two.

inline int64_t ipow(int64_t base, int exp) {
  int64_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

// Set of disjoint (left, right) pairs; canonical order is the sorted pair
// list.
struct PairingSet {
  std::vector<std::pair<int, int>> pairs;

  PairingSet() = default;
  explicit PairingSet(std::vector<std::pair<int, int>> ps) : pairs(std::move(ps)) {
    canonicalize();
  }

  int size() const { return static_cast<int>(pairs.size()); }

  void canonicalize() { std::sort(pairs.begin(), pairs.end()); }

  void validate(int p, int q) const {
    std::vector<bool> l(p, false), r(q, false);
    for (auto [a, b] : pairs) {
      if (a < 0 || a >= p || b < 0 || b >= q)
        throw std::invalid_argument("PairingSet: leg out of range");
      if (l[a] || r[b]) throw std::invalid_argument("PairingSet: repeated leg");
      l[a] = r[b] = true;
    }
  }

  std::vector<int> unpaired_lefts(int p) const {
    std::vector<bool> used(p, false);
    for (auto [a, b] : pairs) used[a] = true;
    std::vector<int> out;
    for (int a = 0; a < p; ++a)
      if (!used[a]) out.push_back(a);
    return out;
  }
  std::vector<int> unpaired_rights(int q) const {
    std::vector<bool> used(q, false);
    for (auto [a, b] : pairs) used[b] = true;
    std::vector<int> out;
    for (int b = 0; b < q; ++b)
      if (!used[b]) out.push_back(b);
    return out;
  }

  bool operator==(const PairingSet& o) const { return pairs == o.pairs; }
  bool operator<(const PairingSet& o) const { return pairs < o.pairs; }
};

// All pairings of a given size, lexicographic on the sorted pair list.
inline std::vector<PairingSet> enumerate_pairings(int p, int q, int ell) {
  std::vector<PairingSet> out;
  std::vector<std::pair<int, int>> cur;
  std::function<void(int)> rec = [&](int next_left) {
    if (int(cur.size()) == ell) {
      out.push_back(PairingSet(cur));
      return;
    }
    for (int a = next_left; a < p; ++a) {
      for (int b = 0; b < q; ++b) {
        bool used = false;
        for (auto [x, y] : cur) used = used || y == b;
        if (used) continue;
        cur.push_back({a, b});
        rec(a + 1);
        cur.pop_back();
      }
    }
  };
  rec(0);
  std::sort(out.begin(), out.end());
  return out;
}

// All pairings of all sizes, sizes ascending, canonical within each size.
inline std::vector<PairingSet> enumerate_all_pairings(int p, int q) {
  std::vector<PairingSet> out;
  for (int ell = 0; ell <= std::min(p, q); ++ell) {
    auto v = enumerate_pairings(p, q, ell);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

// Partially transposed permutation, labeled by (input pairs, output pairs,
// left wires, right wires).  perm_left maps the rank of an unpaired input
// left leg to the rank of the unpaired output left leg it connects to;
// similarly perm_right.
struct PtpLabel {
  int p = 1, q = 0;
  PairingSet alpha_in, alpha_out;
  Permutation perm_left, perm_right;

  static PtpLabel identity(int p, int q) {
    PtpLabel l;
    l.p = p;
    l.q = q;
    l.perm_left = Permutation::identity(p);
    l.perm_right = Permutation::identity(q);
    return l;
  }

  int ell() const { return alpha_in.size(); }

  void validate() const {
    alpha_in.validate(p, q);
    alpha_out.validate(p, q);
    if (alpha_in.size() != alpha_out.size())
      throw std::invalid_argument("PtpLabel: input/output pair counts differ");
    if (perm_left.size() != p - ell() || perm_right.size() != q - ell())
      throw std::invalid_argument("PtpLabel: wire permutation sizes mismatch");
    if (!perm_left.is_valid() || !perm_right.is_valid())
      throw std::invalid_argument("PtpLabel: invalid wire permutation");
  }

  bool operator==(const PtpLabel& o) const {
    return p == o.p && q == o.q && alpha_in == o.alpha_in && alpha_out == o.alpha_out &&
           perm_left == o.perm_left && perm_right == o.perm_right;
  }
  bool operator<(const PtpLabel& o) const {
    auto key = [](const PtpLabel& l) {
      return std::make_tuple(l.alpha_in.pairs, l.alpha_out.pairs, l.perm_left.images,
                             l.perm_right.images);
    };
    return key(*this) < key(o);
  }

  // Adjoint (matrices are real 0/1, so adjoint = transpose): swap cups and
  // caps and reverse the wires.
  PtpLabel adjoint() const {
    PtpLabel l;
    l.p = p;
    l.q = q;
    l.alpha_in = alpha_out;
    l.alpha_out = alpha_in;
    l.perm_left = perm_left.inverse();
    l.perm_right = perm_right.inverse();
    return l;
  }
};

inline std::vector<PtpLabel> enumerate_ptps(int p, int q) {
  std::vector<PtpLabel> out;
  for (int ell = 0; ell <= std::min(p, q); ++ell) {
    auto ins = enumerate_pairings(p, q, ell);
    auto permsL = wg::all_permutations(p - ell);
    auto permsR = wg::all_permutations(q - ell);
    for (const auto& ai : ins)
      for (const auto& ao : ins)
        for (const auto& pl : permsL)
          for (const auto& pr : permsR) {
            PtpLabel l;
            l.p = p;
            l.q = q;
            l.alpha_in = ai;
            l.alpha_out = ao;
            l.perm_left = pl;
            l.perm_right = pr;
            out.push_back(l);
          }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Index helpers (base-D digits, digit 0 most significant).
// ---------------------------------------------------------------------------

inline void decode_digits(int64_t index, int D, int count, int* digits) {
  for (int i = count - 1; i >= 0; --i) {
    digits[i] = int(index % D);
    index /= D;
  }
}

inline int64_t encode_digits(const int* digits, int D, int count) {
  int64_t idx = 0;
  for (int i = 0; i < count; ++i) idx = idx * D + digits[i];
  return idx;
}

// Visits the nonzero entries (row, col) of the PTP matrix; every entry is 1.
template <typename F>
inline void visit_ptp_entries(const PtpLabel& l, int D, F&& visit) {
  l.validate();
  const int p = l.p, q = l.q, legs = p + q, ell = l.ell();
  const int64_t N = ipow(D, legs);
  auto ul_in = l.alpha_in.unpaired_lefts(p);
  auto ur_in = l.alpha_in.unpaired_rights(q);
  auto ul_out = l.alpha_out.unpaired_lefts(p);
  auto ur_out = l.alpha_out.unpaired_rights(q);
  std::vector<int> in(legs), out(legs);
  const int64_t caps = ipow(D, ell);
  for (int64_t col = 0; col < N; ++col) {
    decode_digits(col, D, legs, in.data());
    bool ok = true;
    for (auto [a, b] : l.alpha_in.pairs) ok = ok && (in[a] == in[p + b]);
    if (!ok) continue;
    // through wires
    std::fill(out.begin(), out.end(), 0);
    for (size_t r = 0; r < ul_in.size(); ++r)
      out[ul_out[l.perm_left.images[r]]] = in[ul_in[r]];
    for (size_t r = 0; r < ur_in.size(); ++r)
      out[p + ur_out[l.perm_right.images[r]]] = in[p + ur_in[r]];
    for (int64_t capv = 0; capv < caps; ++capv) {
      int64_t v = capv;
      for (auto [a, b] : l.alpha_out.pairs) {
        int digit = int(v % D);
        v /= D;
        out[a] = digit;
        out[p + b] = digit;
      }
      visit(encode_digits(out.data(), D, legs), col);
    }
  }
}

inline Mat ptp_matrix(const PtpLabel& l, int D) {
  const int64_t N = ipow(D, l.p + l.q);
  if (N > (int64_t(1) << 12)) throw std::invalid_argument("ptp_matrix: size limit exceeded");
  Mat m = Mat::Zero(N, N);
  visit_ptp_entries(l, D, [&](int64_t r, int64_t c) { m(r, c) = 1.0; });
  return m;
}

inline cplx frobenius_with_ptp(const PtpLabel& l, int D, const Mat& M) {
  cplx acc = 0.0;
  visit_ptp_entries(l, D, [&](int64_t r, int64_t c) { acc += M(r, c); });
  return acc;  // tr(l^dag M)
}

// ---------------------------------------------------------------------------
// Diagrammatic composition: mat(a) * mat(b) = D^{loops} * mat(compose(a,b)).
// ---------------------------------------------------------------------------

struct Composition {
  int loops = 0;
  PtpLabel label;
};

inline Composition compose(const PtpLabel& a, const PtpLabel& b) {
  if (a.p != b.p || a.q != b.q) throw std::invalid_argument("compose: shape mismatch");
  const int p = a.p, q = a.q, legs = p + q;
  // Node ids: bottom 0..legs-1, middle legs..2legs-1, top 2legs..3legs-1.
  // b acts first: bottom = b inputs, middle = b outputs = a inputs,
  // top = a outputs.
  std::vector<std::vector<int>> adj(3 * legs);
  auto link = [&](int u, int v) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  };
  auto wire_edges = [&](const PtpLabel& l, int in_base, int out_base) {
    auto ul_in = l.alpha_in.unpaired_lefts(p);
    auto ur_in = l.alpha_in.unpaired_rights(q);
    auto ul_out = l.alpha_out.unpaired_lefts(p);
    auto ur_out = l.alpha_out.unpaired_rights(q);
    for (auto [x, y] : l.alpha_in.pairs) link(in_base + x, in_base + p + y);
    for (auto [x, y] : l.alpha_out.pairs) link(out_base + x, out_base + p + y);
    for (size_t r = 0; r < ul_in.size(); ++r)
      link(in_base + ul_in[r], out_base + ul_out[l.perm_left.images[r]]);
    for (size_t r = 0; r < ur_in.size(); ++r)
      link(in_base + p + ur_in[r], out_base + p + ur_out[l.perm_right.images[r]]);
  };
  wire_edges(b, 0, legs);
  wire_edges(a, legs, 2 * legs);

  std::vector<int> comp(3 * legs, -1);
  int ncomp = 0;
  for (int s = 0; s < 3 * legs; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (comp[v] < 0) {
          comp[v] = ncomp;
          stack.push_back(v);
        }
    }
    ++ncomp;
  }

  // Classify components by their external endpoints.
  std::vector<std::vector<int>> externals(ncomp);
  for (int u = 0; u < 3 * legs; ++u)
    if (u < legs || u >= 2 * legs) externals[comp[u]].push_back(u);

  Composition result;
  result.label.p = p;
  result.label.q = q;
  std::vector<std::pair<int, int>> wiresL, wiresR;  // (bottom leg, top leg)
  for (int cidx = 0; cidx < ncomp; ++cidx) {
    const auto& ext = externals[cidx];
    if (ext.empty()) {
      ++result.loops;
      continue;
    }
    if (ext.size() != 2) throw std::logic_error("compose: malformed diagram component");
    int u = ext[0], v = ext[1];
    bool u_bottom = u < legs, v_bottom = v < legs;
    int ul = u_bottom ? u : u - 2 * legs;
    int vl = v_bottom ? v : v - 2 * legs;
    if (u_bottom && v_bottom) {
      // new cup: one left + one right bottom leg
      int left = std::min(ul, vl), right = std::max(ul, vl);
      if (left >= p || right < p) throw std::logic_error("compose: invalid cup endpoints");
      result.label.alpha_in.pairs.push_back({left, right - p});
    } else if (!u_bottom && !v_bottom) {
      int left = std::min(ul, vl), right = std::max(ul, vl);
      if (left >= p || right < p) throw std::logic_error("compose: invalid cap endpoints");
      result.label.alpha_out.pairs.push_back({left, right - p});
    } else {
      int bottom = u_bottom ? ul : vl;
      int top = u_bottom ? vl : ul;
      if (bottom < p && top < p) wiresL.push_back({bottom, top});
      else if (bottom >= p && top >= p) wiresR.push_back({bottom - p, top - p});
      else throw std::logic_error("compose: wire crosses the wall");
    }
  }
  result.label.alpha_in.canonicalize();
  result.label.alpha_out.canonicalize();

  auto build_perm = [](std::vector<std::pair<int, int>>& wires) {
    std::sort(wires.begin(), wires.end());
    std::vector<int> tops;
    for (auto [b, t] : wires) tops.push_back(t);
    std::vector<int> sorted = tops;
    std::sort(sorted.begin(), sorted.end());
    Permutation perm;
    perm.images.resize(wires.size());
    for (size_t r = 0; r < wires.size(); ++r) {
      auto it = std::lower_bound(sorted.begin(), sorted.end(), tops[r]);
      perm.images[r] = int(it - sorted.begin());
    }
    return perm;
  };
  result.label.perm_left = build_perm(wiresL);
  result.label.perm_right = build_perm(wiresR);
  result.label.validate();
  return result;
}

// tr(mat(l)) = D^{#cycles} after closing every top leg onto the matching
// bottom leg.
inline int trace_loop_count(const PtpLabel& l) {
  const int p = l.p, q = l.q, legs = p + q;
  std::vector<std::vector<int>> adj(2 * legs);
  auto link = [&](int u, int v) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  };
  auto ul_in = l.alpha_in.unpaired_lefts(p);
  auto ur_in = l.alpha_in.unpaired_rights(q);
  auto ul_out = l.alpha_out.unpaired_lefts(p);
  auto ur_out = l.alpha_out.unpaired_rights(q);
  for (auto [x, y] : l.alpha_in.pairs) link(x, p + y);
  for (auto [x, y] : l.alpha_out.pairs) link(legs + x, legs + p + y);
  for (size_t r = 0; r < ul_in.size(); ++r) link(ul_in[r], legs + ul_out[l.perm_left.images[r]]);
  for (size_t r = 0; r < ur_in.size(); ++r)
    link(p + ur_in[r], legs + p + ur_out[l.perm_right.images[r]]);
  for (int leg = 0; leg < legs; ++leg) link(leg, legs + leg);  // closure
  std::vector<bool> seen(2 * legs, false);
  int cycles = 0;
  for (int s = 0; s < 2 * legs; ++s) {
    if (seen[s]) continue;
    ++cycles;
    std::vector<int> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
    }
  }
  return cycles;
}

// tr(mat(a)^dag mat(b)) computed diagrammatically (exact integer power of D).
inline double ptp_inner(const PtpLabel& a, const PtpLabel& b, double D) {
  Composition c = compose(a.adjoint(), b);
  return std::pow(D, c.loops + trace_loop_count(c.label));
}

// ---------------------------------------------------------------------------
// Projectors
// ---------------------------------------------------------------------------

inline PtpLabel bare_label(const PairingSet& alpha, int p, int q) {
  PtpLabel l;
  l.p = p;
  l.q = q;
  l.alpha_in = alpha;
  l.alpha_out = alpha;
  l.perm_left = Permutation::identity(p - alpha.size());
  l.perm_right = Permutation::identity(q - alpha.size());
  return l;
}

// P_alpha = sigma / D^{|alpha|}: projects onto the EPR state on every pair.
inline Mat bare_projector(const PairingSet& alpha, int D, int p, int q) {
  Mat m = ptp_matrix(bare_label(alpha, p, q), D);
  return m / std::pow(double(D), alpha.size());
}

// Embeds an operator acting on the listed legs (lefts then rights, each
// ascending) into the full (p,q) space.
inline Mat embed_on_legs(const Mat& small, const std::vector<int>& lefts,
                         const std::vector<int>& rights, int D, int p, int q) {
  const int legs = p + q;
  const int slegs = int(lefts.size() + rights.size());
  const int64_t N = ipow(D, legs), S = ipow(D, slegs);
  if (small.rows() != S) throw std::invalid_argument("embed_on_legs: dimension mismatch");
  std::vector<int> pos;
  for (int a : lefts) pos.push_back(a);
  for (int b : rights) pos.push_back(p + b);
  Mat out = Mat::Zero(N, N);
  std::vector<int> digits(legs), sdig(slegs), rdig(legs);
  for (int64_t col = 0; col < N; ++col) {
    decode_digits(col, D, legs, digits.data());
    for (int i = 0; i < slegs; ++i) sdig[i] = digits[pos[i]];
    int64_t scol = encode_digits(sdig.data(), D, slegs);
    for (int64_t srow = 0; srow < S; ++srow) {
      cplx v = small(srow, scol);
      if (v == cplx(0.0, 0.0)) continue;
      rdig = digits;
      int64_t tmp = srow;
      for (int i = slegs - 1; i >= 0; --i) {
        rdig[pos[i]] = int(tmp % D);
        tmp /= D;
      }
      out(encode_digits(rdig.data(), D, legs), col) = v;
    }
  }
  return out;
}

inline int64_t rank_of(const Mat& psd, double cutoff = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (psd + psd.adjoint()), Eigen::EigenvaluesOnly);
  int64_t r = 0;
  for (int64_t i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > cutoff) ++r;
  return r;
}

inline Mat span_projector(const Mat& psd, double cutoff = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (psd + psd.adjoint()));
  Mat out = Mat::Zero(psd.rows(), psd.cols());
  for (int64_t i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > cutoff)
      out += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  return out;
}

enum class NoEprMethod { nullspace, weingarten };

// Maps a permutation of S_{p+q} to the label of its partial transpose on the
// right block: L->R crossings become cups, R->L crossings become caps, R->R
// wires reverse direction.
inline PtpLabel ptp_of_perm(const Permutation& pi, int p, int q) {
  PtpLabel l;
  l.p = p;
  l.q = q;
  std::vector<std::pair<int, int>> wl, wr;  // (input leg, output leg)
  for (int r = 0; r < p + q; ++r) {
    int s = pi.images[r];
    if (r < p && s < p) wl.push_back({r, s});
    else if (r >= p && s >= p) wr.push_back({s - p, r - p});  // direction flips
    else if (r < p && s >= p) l.alpha_in.pairs.push_back({r, s - p});
    else l.alpha_out.pairs.push_back({s, r - p});
  }
  l.alpha_in.canonicalize();
  l.alpha_out.canonicalize();
  auto build = [](std::vector<std::pair<int, int>>& wires) {
    std::sort(wires.begin(), wires.end());
    std::vector<int> outs;
    for (auto [i, o] : wires) outs.push_back(o);
    std::vector<int> sorted = outs;
    std::sort(sorted.begin(), sorted.end());
    Permutation perm;
    perm.images.resize(wires.size());
    for (size_t r = 0; r < wires.size(); ++r)
      perm.images[r] = int(std::lower_bound(sorted.begin(), sorted.end(), outs[r]) - sorted.begin());
    return perm;
  };
  l.perm_left = build(wl);
  l.perm_right = build(wr);
  l.validate();
  return l;
}

inline Mat no_epr_projector(int p, int q, int D, NoEprMethod method = NoEprMethod::nullspace) {
  const int64_t N = ipow(D, p + q);
  if (std::min(p, q) == 0) return Mat::Identity(N, N);
  if (method == NoEprMethod::nullspace) {
    Mat sum = Mat::Zero(N, N);
    for (int ell = 1; ell <= std::min(p, q); ++ell)
      for (const auto& alpha : enumerate_pairings(p, q, ell))
        sum += bare_projector(alpha, D, p, q);
    return Mat::Identity(N, N) - span_projector(sum);
  }
  // Weingarten expansion:
  //   Pi^nE = sum_{pt} [ sum_{pi in perm block} [Wg|_perm^{-1}]_{1, pi}
  //                      Wg_{pi, pt} ] Gamma(S_pt)
  wg::WeingartenTable t = wg::weingarten_table(p + q, double(D));
  auto blocks = wg::block_permutations(p, q);
  const int f = static_cast<int>(blocks.size());
  RMat sub(f, f);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j) sub(i, j) = t.wg(t.index_of(blocks[i]), t.index_of(blocks[j]));
  Eigen::FullPivLU<RMat> lu(sub);
  if (!lu.isInvertible())
    throw std::runtime_error("no_epr_projector: ill-conditioned Weingarten submatrix");
  RMat inv = lu.inverse();
  int id_row = -1;
  for (int i = 0; i < f; ++i)
    if (blocks[i] == Permutation::identity(p + q)) id_row = i;
  Mat out = Mat::Zero(N, N);
  for (const auto& pt : t.perms) {
    double coeff = 0.0;
    for (int i = 0; i < f; ++i)
      coeff += inv(id_row, i) * t.wg(t.index_of(blocks[i]), t.index_of(pt));
    if (std::abs(coeff) < 1e-15) continue;
    out += coeff * ptp_matrix(ptp_of_perm(pt, p, q), D);
  }
  return out;
}

// P^nE_alpha = P_alpha * Pi^nE on the complement legs.
inline Mat nearly_orthogonal_projector(const PairingSet& alpha, int D, int p, int q) {
  const int ell = alpha.size();
  Mat pa = bare_projector(alpha, D, p, q);
  if (p - ell == 0 || q - ell == 0) return pa;  // no cross pairs on the complement
  Mat small = no_epr_projector(p - ell, q - ell, D);
  Mat pi = embed_on_legs(small, alpha.unpaired_lefts(p), alpha.unpaired_rights(q), D, p, q);
  return pa * pi;
}

enum class PairingOrder { lex, reverse_lex };

struct OrthogonalProjectors {
  std::vector<PairingSet> pairings;  // sizes ascending; within size per order
  std::vector<Mat> p_ne;             // nearly-orthogonal projectors
  std::vector<Mat> p_tilde;          // Gram-Schmidt orthogonalized
  std::vector<Mat> p_ell;            // per-size sums, index by ell
};

inline OrthogonalProjectors orthogonal_projectors(int p, int q, int D,
                                                  PairingOrder order = PairingOrder::lex) {
  OrthogonalProjectors out;
  const int64_t N = ipow(D, p + q);
  for (int ell = 0; ell <= std::min(p, q); ++ell) {
    auto v = enumerate_pairings(p, q, ell);
    if (order == PairingOrder::reverse_lex) std::reverse(v.begin(), v.end());
    out.pairings.insert(out.pairings.end(), v.begin(), v.end());
  }
  Mat cumulative = Mat::Zero(N, N);
  Mat prev_proj = Mat::Zero(N, N);
  out.p_ell.assign(std::min(p, q) + 1, Mat::Zero(N, N));
  for (const auto& alpha : out.pairings) {
    Mat pne = nearly_orthogonal_projector(alpha, D, p, q);
    cumulative += pne;
    Mat proj = span_projector(cumulative);
    Mat ptilde = proj - prev_proj;
    prev_proj = proj;
    out.p_ne.push_back(std::move(pne));
    out.p_ell[alpha.size()] += ptilde;
    out.p_tilde.push_back(std::move(ptilde));
  }
  return out;
}

inline int64_t n_epr(int p, int q, int D) {
  if (std::min(p, q) == 0) return 0;
  const int64_t N = ipow(D, p + q);
  Mat sum = Mat::Zero(N, N);
  for (int ell = 1; ell <= std::min(p, q); ++ell)
    for (const auto& alpha : enumerate_pairings(p, q, ell))
      sum += bare_projector(alpha, D, p, q);
  return rank_of(sum);
}

// ---------------------------------------------------------------------------
// Sector isometries I~_alpha = I_alpha M_alpha P~_alpha and their per-size
// sums I~_l (with the A_l pairing register ordered canonically).
// ---------------------------------------------------------------------------

struct SectorData {
  int p = 1, q = 1, D = 2;
  OrthogonalProjectors proj;
  std::vector<wg::SectorIsometry> isometries;       // one per ell
  std::vector<Mat> iso_alpha;                        // one per pairing (aligned with proj.pairings)
};

// (1_{complement} (x) <E_alpha|): rows indexed by the unpaired legs.
inline Mat epr_contraction(const PairingSet& alpha, int D, int p, int q) {
  const int ell = alpha.size();
  auto ul = alpha.unpaired_lefts(p);
  auto ur = alpha.unpaired_rights(q);
  const int slegs = p + q - 2 * ell;
  const int64_t S = ipow(D, slegs), N = ipow(D, p + q);
  std::vector<int> pos;
  for (int a : ul) pos.push_back(a);
  for (int b : ur) pos.push_back(p + b);
  Mat out = Mat::Zero(S, N);
  const double w = std::pow(double(D), -0.5 * ell);
  std::vector<int> digits(p + q), sdig(slegs);
  for (int64_t col = 0; col < N; ++col) {
    decode_digits(col, D, p + q, digits.data());
    bool ok = true;
    for (auto [a, b] : alpha.pairs) ok = ok && (digits[a] == digits[p + b]);
    if (!ok) continue;
    for (int i = 0; i < slegs; ++i) sdig[i] = digits[pos[i]];
    out(encode_digits(sdig.data(), D, slegs), col) = w;
  }
  return out;
}

inline SectorData sector_isometries(int p, int q, int D) {
  if (D < p + q)
    throw std::invalid_argument("sector_isometries: need D >= p + q for a faithful PTP basis");
  SectorData sd;
  sd.p = p;
  sd.q = q;
  sd.D = D;
  sd.proj = orthogonal_projectors(p, q, D);

  // PTP Gram matrix for expanding projectors in the diagram basis.
  auto labels = enumerate_ptps(p, q);
  const int nl = static_cast<int>(labels.size());
  RMat gram(nl, nl);
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < nl; ++j) gram(i, j) = ptp_inner(labels[i], labels[j], double(D));
  Eigen::FullPivLU<RMat> lu(gram);
  if (!lu.isInvertible()) throw std::runtime_error("sector_isometries: PTP Gram singular");

  const int lmax = std::min(p, q);
  std::vector<std::vector<int>> alpha_of_ell(lmax + 1);
  for (size_t i = 0; i < sd.proj.pairings.size(); ++i)
    alpha_of_ell[sd.proj.pairings[i].size()].push_back(int(i));

  sd.iso_alpha.resize(sd.proj.pairings.size());
  for (size_t ai = 0; ai < sd.proj.pairings.size(); ++ai) {
    const PairingSet& alpha = sd.proj.pairings[ai];
    const int ell = alpha.size();
    const Mat& ptilde = sd.proj.p_tilde[ai];
    // Expand P~_alpha over the PTP basis and keep the (alpha, alpha, *, *)
    // component.
    Eigen::VectorXd v(nl);
    for (int i = 0; i < nl; ++i)
      v(i) = frobenius_with_ptp(labels[i], D, ptilde).real();
    Eigen::VectorXd coeff = lu.solve(v);
    const int pl = p - ell, ql = q - ell;
    const int64_t S = ipow(D, pl + ql);
    Mat A = Mat::Zero(S, S);
    const double dl = std::pow(double(D), ell);
    for (int i = 0; i < nl; ++i) {
      if (std::abs(coeff(i)) < 1e-13) continue;
      const PtpLabel& l = labels[i];
      if (!(l.alpha_in == alpha) || !(l.alpha_out == alpha)) continue;
      // (alpha, alpha, piL, piR) = D^ell |E_alpha><E_alpha| (x) S_{piL} (+) S_{piR}
      Permutation joint;
      joint.images.resize(pl + ql);
      for (int r = 0; r < pl; ++r) joint.images[r] = l.perm_left.images[r];
      for (int r = 0; r < ql; ++r) joint.images[pl + r] = pl + l.perm_right.images[r];
      for (int64_t colidx = 0; colidx < S; ++colidx) {
        // move digit content of register r to joint(r), base D
        std::vector<int> digs(pl + ql), odig(pl + ql);
        decode_digits(colidx, D, pl + ql, digs.data());
        for (int r = 0; r < pl + ql; ++r) odig[joint.images[r]] = digs[r];
        A(encode_digits(odig.data(), D, pl + ql), colidx) += coeff(i) * dl;
      }
    }
    Mat pine_small = no_epr_projector(pl, ql, D);
    Mat m2 = pine_small * A * pine_small;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m2 + m2.adjoint()));
    Mat sqrtm = Mat::Zero(S, S);
    for (int64_t i = 0; i < es.eigenvalues().size(); ++i) {
      double lam = es.eigenvalues()(i);
      if (lam < -1e-8)
        throw std::runtime_error("sector_isometries: M_alpha^2 not PSD within tolerance");
      if (lam < 1e-10) continue;
      sqrtm += std::sqrt(lam) * es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
    }
    sd.iso_alpha[ai] = sqrtm * epr_contraction(alpha, D, p, q) * ptilde;
  }

  for (int ell = 0; ell <= lmax; ++ell) {
    wg::SectorIsometry iso;
    iso.ell = ell;
    iso.a_dim = int64_t(alpha_of_ell[ell].size());
    iso.small_dim = ipow(D, p + q - 2 * ell);
    iso.matrix = Mat::Zero(iso.small_dim * iso.a_dim, ipow(D, p + q));
    for (size_t slot = 0; slot < alpha_of_ell[ell].size(); ++slot) {
      int ai = alpha_of_ell[ell][slot];
      iso.matrix.block(int64_t(slot) * iso.small_dim, 0, iso.small_dim, iso.matrix.cols()) =
          sd.iso_alpha[ai];
    }
    sd.isometries.push_back(std::move(iso));
  }
  return sd;
}

// ---------------------------------------------------------------------------
// Approximate orthogonality of the EPR projectors (matrix-free for large D).
// ---------------------------------------------------------------------------

// P_pair projection |Phi><Phi| on (left a, right b), in place.
inline void project_epr_pair(std::vector<cplx>& v, int a, int b, int D, int p, int q) {
  const int legs = p + q;
  const int64_t N = ipow(D, legs);
  const int64_t strideA = ipow(D, legs - 1 - a);
  const int64_t strideB = ipow(D, legs - 1 - (p + b));
  std::vector<cplx> next(N, cplx(0, 0));
  // iterate over indices with digits a and b equal to zero, then sweep pair
  for (int64_t base = 0; base < N; ++base) {
    int da = int((base / strideA) % D), db = int((base / strideB) % D);
    if (da != 0 || db != 0) continue;
    cplx s = 0.0;
    for (int w = 0; w < D; ++w) s += v[base + w * strideA + w * strideB];
    s /= double(D);
    for (int w = 0; w < D; ++w) next[base + w * strideA + w * strideB] = s;
  }
  v.swap(next);
}

// Applies P^nE_alpha matrix-free.  Supported complements: no cross pairs
// possible (identity no-EPR factor) or a single (1,1) pair (1 - P_pair).
inline void apply_pne_alpha(std::vector<cplx>& v, const PairingSet& alpha, int D, int p, int q) {
  auto ul = alpha.unpaired_lefts(p);
  auto ur = alpha.unpaired_rights(q);
  for (auto [a, b] : alpha.pairs) project_epr_pair(v, a, b, D, p, q);
  if (ul.empty() || ur.empty()) return;
  if (ul.size() == 1 && ur.size() == 1) {
    std::vector<cplx> proj = v;
    project_epr_pair(proj, ul[0], ur[0], D, p, q);
    for (int64_t i = 0; i < int64_t(v.size()); ++i) v[i] -= proj[i];
    return;
  }
  throw std::invalid_argument("apply_pne_alpha: complement too large for matrix-free mode");
}

// ||A||_inf via power iteration on A^dag A with a deterministic start.
inline double operator_norm_power(
    const std::function<void(std::vector<cplx>&)>& apply,
    const std::function<void(std::vector<cplx>&)>& apply_adj, int64_t dim, uint64_t seed,
    int iters = 300) {
  Rng rng(seed);
  std::vector<cplx> v(dim);
  for (auto& x : v) x = cplx(rng.gaussian(), rng.gaussian());
  double norm = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<cplx> w = v;
    apply(w);
    apply_adj(w);
    double nw = 0.0;
    for (auto& x : w) nw += std::norm(x);
    nw = std::sqrt(nw);
    if (nw < 1e-300) return 0.0;
    double prev = norm;
    norm = nw;
    for (int64_t i = 0; i < dim; ++i) v[i] = w[i] / nw;
    if (it > 20 && std::abs(norm - prev) < 1e-12 * std::max(1.0, norm)) break;
  }
  return std::sqrt(norm);
}

// G^{(l)}_{ab} = ||P^nE_a P^nE_b||_inf (zero diagonal).
inline RMat approx_orthogonality_G(int p, int q, int D, int ell, uint64_t seed = 17) {
  auto alphas = enumerate_pairings(p, q, ell);
  const int na = static_cast<int>(alphas.size());
  const int64_t N = ipow(D, p + q);
  RMat G = RMat::Zero(na, na);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) {
      if (i == j) continue;
      auto apply = [&](std::vector<cplx>& v) {
        apply_pne_alpha(v, alphas[j], D, p, q);
        apply_pne_alpha(v, alphas[i], D, p, q);
      };
      auto apply_adj = [&](std::vector<cplx>& v) {
        apply_pne_alpha(v, alphas[i], D, p, q);
        apply_pne_alpha(v, alphas[j], D, p, q);
      };
      G(i, j) = operator_norm_power(apply, apply_adj, N, seed + i * 97 + j);
    }
  return G;
}

// F^{(l,l')}_{ab} per the approximate-orthogonality theorem.
inline RMat approx_orthogonality_F(int p, int q, int D, int ell, int ellp, uint64_t seed = 23) {
  auto alphas = enumerate_pairings(p, q, ell);
  auto gammas = enumerate_pairings(p, q, ellp);
  const int na = static_cast<int>(alphas.size());
  const int64_t N = ipow(D, p + q);
  double binom = 1.0;
  for (int i = 0; i < ellp; ++i) binom = binom * double(ell - i) / double(i + 1);
  RMat F = RMat::Zero(na, na);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) {
      double acc = 0.0;
      for (size_t g = 0; g < gammas.size(); ++g) {
        if (i == j) {
          // skip gamma contained in alpha on the diagonal
          bool subset = true;
          for (auto pr : gammas[g].pairs) {
            bool found = false;
            for (auto pr2 : alphas[i].pairs) found = found || pr == pr2;
            subset = subset && found;
          }
          if (subset) continue;
        }
        auto apply = [&](std::vector<cplx>& v) {
          apply_pne_alpha(v, alphas[j], D, p, q);
          for (auto [a, b] : gammas[g].pairs) project_epr_pair(v, a, b, D, p, q);
          apply_pne_alpha(v, alphas[i], D, p, q);
        };
        auto apply_adj = [&](std::vector<cplx>& v) {
          apply_pne_alpha(v, alphas[i], D, p, q);
          for (auto [a, b] : gammas[g].pairs) project_epr_pair(v, a, b, D, p, q);
          apply_pne_alpha(v, alphas[j], D, p, q);
        };
        acc += operator_norm_power(apply, apply_adj, N, seed + 131 * i + 31 * j + g);
      }
      F(i, j) = acc / binom;
    }
  return F;
}

}  // namespace haarlab::brauer
