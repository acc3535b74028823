#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "haarlab/linalg.hpp"
#include "haarlab/serialize.hpp"

namespace haarlab::wg {

// ---------------------------------------------------------------------------
// Permutations of k registers (0-based images).
// ---------------------------------------------------------------------------

struct Permutation {
  std::vector<int> images;  // images[i] = pi(i)

  static Permutation identity(int k) {
    Permutation p;
    p.images.resize(k);
    std::iota(p.images.begin(), p.images.end(), 0);
    return p;
  }

  int size() const { return static_cast<int>(images.size()); }

  bool is_valid() const {
    std::vector<bool> seen(images.size(), false);
    for (int v : images) {
      if (v < 0 || v >= int(images.size()) || seen[v]) return false;
      seen[v] = true;
    }
    return true;
  }

  Permutation inverse() const {
    Permutation p;
    p.images.resize(images.size());
    for (int i = 0; i < size(); ++i) p.images[images[i]] = i;
    return p;
  }

  // (a then this): result(i) = this(a(i))
  Permutation after(const Permutation& a) const {
    Permutation p;
    p.images.resize(images.size());
    for (int i = 0; i < size(); ++i) p.images[i] = images[a.images[i]];
    return p;
  }

  bool operator==(const Permutation& o) const { return images == o.images; }
  bool operator<(const Permutation& o) const { return images < o.images; }
};

inline int cycle_count(const Permutation& p) {
  std::vector<bool> seen(p.images.size(), false);
  int cycles = 0;
  for (int i = 0; i < p.size(); ++i) {
    if (seen[i]) continue;
    ++cycles;
    int j = i;
    while (!seen[j]) {
      seen[j] = true;
      j = p.images[j];
    }
  }
  return cycles;
}

inline std::vector<Permutation> all_permutations(int k) {
  std::vector<int> base(k);
  std::iota(base.begin(), base.end(), 0);
  std::vector<Permutation> out;
  do {
    Permutation p;
    p.images = base;
    out.push_back(p);
  } while (std::next_permutation(base.begin(), base.end()));
  return out;
}

// Basis-index action of S_pi on k registers of n qubits each (register 0 is
// the most significant block): the content of register r moves to register
// pi(r).
inline int64_t permute_registers(int64_t index, const Permutation& pi, int k, int n) {
  const int64_t mask = (int64_t(1) << n) - 1;
  int64_t out = 0;
  for (int r = 0; r < k; ++r) {
    int64_t digit = (index >> (n * (k - 1 - r))) & mask;
    out |= digit << (n * (k - 1 - pi.images[r]));
  }
  return out;
}

inline Mat permutation_operator(const Permutation& pi, int k, int n) {
  const int64_t N = int64_t(1) << (n * k);
  Mat m = Mat::Zero(N, N);
  for (int64_t i = 0; i < N; ++i) m(permute_registers(i, pi, k, n), i) = 1.0;
  return m;
}

// tr(X * S_pi)
inline cplx trace_against_perm(const Mat& X, const Permutation& pi, int k, int n) {
  cplx acc = 0.0;
  for (int64_t i = 0; i < X.rows(); ++i) acc += X(i, permute_registers(i, pi, k, n));
  return acc;
}

// ---------------------------------------------------------------------------
// Weingarten table: gram[pi][sigma] = D^{cycles(pi sigma^-1)}, wg = gram^-1.
// ---------------------------------------------------------------------------

struct WeingartenTable {
  int k = 1;
  double D = 2;
  std::vector<Permutation> perms;  // lexicographic order
  RMat gram;
  RMat wg;
  std::map<std::vector<int>, int> index;

  int index_of(const Permutation& p) const { return index.at(p.images); }

  // Wg as a class function: Wg(rho) = wg[id][rho].
  double wg_of(const Permutation& rho) const { return wg(0, index_of(rho)); }

  json to_json() const {
    json j{{"k", k}, {"D", D}};
    std::vector<double> flat;
    flat.reserve(wg.size());
    for (int64_t r = 0; r < wg.rows(); ++r)
      for (int64_t c = 0; c < wg.cols(); ++c) flat.push_back(wg(r, c));
    j["wg"] = flat;
    return j;
  }
};

inline WeingartenTable weingarten_table(int k, double D) {
  if (k < 1 || k > 6) throw std::invalid_argument("weingarten_table: k out of range [1,6]");
  WeingartenTable t;
  t.k = k;
  t.D = D;
  t.perms = all_permutations(k);
  const int f = static_cast<int>(t.perms.size());
  for (int i = 0; i < f; ++i) t.index[t.perms[i].images] = i;
  t.gram.resize(f, f);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j)
      t.gram(i, j) = std::pow(D, cycle_count(t.perms[i].after(t.perms[j].inverse())));
  Eigen::FullPivLU<RMat> lu(t.gram);
  if (!lu.isInvertible())
    throw std::runtime_error("weingarten_table: singular Gram matrix (D < k?)");
  t.wg = lu.inverse();
  double resid = (t.wg * t.gram - RMat::Identity(f, f)).cwiseAbs().maxCoeff();
  if (resid > 1e-6)
    throw std::runtime_error("weingarten_table: ill-conditioned Gram system");
  return t;
}

// ---------------------------------------------------------------------------
// Twirls
// ---------------------------------------------------------------------------

// Phi_H^{(k)}(X) = sum_{pi, tp} Wg_{pi,tp} tr(X pi^{-1}) tp
inline Mat haar_twirl_exact(const Mat& X, int k, int n, const WeingartenTable* table = nullptr) {
  const int64_t N = int64_t(1) << (n * k);
  if (X.rows() != N || X.cols() != N)
    throw std::invalid_argument("haar_twirl_exact: dimension mismatch");
  WeingartenTable local;
  if (!table) {
    local = weingarten_table(k, double(int64_t(1) << n));
    table = &local;
  }
  const int f = static_cast<int>(table->perms.size());
  std::vector<cplx> tr_inv(f);
  for (int i = 0; i < f; ++i)
    tr_inv[i] = trace_against_perm(X, table->perms[i].inverse(), k, n);
  Mat out = Mat::Zero(N, N);
  for (int j = 0; j < f; ++j) {
    cplx coeff = 0.0;
    for (int i = 0; i < f; ++i) coeff += table->wg(i, j) * tr_inv[i];
    if (std::abs(coeff) == 0.0) continue;
    for (int64_t col = 0; col < N; ++col)
      out(permute_registers(col, table->perms[j], k, n), col) += coeff;
  }
  return out;
}

inline std::vector<int> last_q_register_qubits(int p, int q, int n) {
  std::vector<int> qs;
  for (int qubit = n * p; qubit < n * (p + q); ++qubit) qs.push_back(qubit);
  return qs;
}

// Phi_H^{(p,q)}(X) = Gamma(Phi_H^{(p+q)}(Gamma(X))), Gamma = partial transpose
// on the last q registers.
inline Mat mixed_twirl_exact(const Mat& X, int p, int q, int n,
                             const WeingartenTable* table = nullptr) {
  const int k = p + q;
  auto qs = last_q_register_qubits(p, q, n);
  Mat g = partial_transpose(X, qs, n * k);
  Mat tw = haar_twirl_exact(g, k, n, table);
  return partial_transpose(tw, qs, n * k);
}

// Phi_a^{(k)}(X) = 2^{-nk} sum_pi tr(X pi^{-1}) pi
inline Mat approx_twirl(const Mat& X, int k, int n) {
  const int64_t N = int64_t(1) << (n * k);
  if (X.rows() != N || X.cols() != N) throw std::invalid_argument("approx_twirl: dimension mismatch");
  auto perms = all_permutations(k);
  Mat out = Mat::Zero(N, N);
  const double w = 1.0 / double(N);
  for (const auto& pi : perms) {
    cplx coeff = w * trace_against_perm(X, pi.inverse(), k, n);
    if (std::abs(coeff) == 0.0) continue;
    for (int64_t col = 0; col < N; ++col)
      out(permute_registers(col, pi, k, n), col) += coeff;
  }
  return out;
}

// Sector data produced by the walled-Brauer module: the partial isometry
// I_l maps the full (p,q) space onto [no-EPR subspace of (p-l, q-l)] (x) A_l,
// embedded in the full smaller space tensored with the pairing register.
struct SectorIsometry {
  int ell = 0;
  int64_t a_dim = 1;      // |A_l| = C(p,l) C(q,l) l!
  int64_t small_dim = 1;  // 2^{n(p+q-2l)}
  Mat matrix;             // (small_dim * a_dim) x 2^{n(p+q)}
};

// Phi_a^{(p,q)} = sum_l I_l^dag [Phi_a^{(p-l)} (x) Phi_a^{(q-l)} (x) 1_{A_l}] I_l
inline Mat approx_mixed_twirl(const Mat& X, int p, int q, int n,
                              const std::vector<SectorIsometry>& isometries) {
  const int64_t N = int64_t(1) << (n * (p + q));
  if (X.rows() != N || X.cols() != N)
    throw std::invalid_argument("approx_mixed_twirl: dimension mismatch");
  Mat out = Mat::Zero(N, N);
  for (const auto& iso : isometries) {
    const int ell = iso.ell;
    const int pl = p - ell, ql = q - ell;
    Mat Y = iso.matrix * X * iso.matrix.adjoint();
    // Blockwise over the A_l register (most significant part of the row
    // index): apply Phi_a^{(pl)} (x) Phi_a^{(ql)} to each small block.
    auto permsL = all_permutations(std::max(pl, 1));
    auto permsR = all_permutations(std::max(ql, 1));
    if (pl == 0) permsL = {Permutation::identity(0)};
    if (ql == 0) permsR = {Permutation::identity(0)};
    const int64_t sd = iso.small_dim;
    const double w = 1.0 / double(sd);
    Mat Z = Mat::Zero(Y.rows(), Y.cols());
    for (int64_t a = 0; a < iso.a_dim; ++a)
      for (int64_t b = 0; b < iso.a_dim; ++b) {
        Mat blk = Y.block(a * sd, b * sd, sd, sd);
        Mat tw = Mat::Zero(sd, sd);
        for (const auto& pl_perm : permsL)
          for (const auto& pr_perm : permsR) {
            // joint permutation pi_L (+) pi_R on pl + ql registers
            Permutation joint;
            joint.images.resize(pl + ql);
            for (int i = 0; i < pl; ++i) joint.images[i] = pl_perm.images[i];
            for (int i = 0; i < ql; ++i) joint.images[pl + i] = pl + pr_perm.images[i];
            cplx coeff = w * trace_against_perm(blk, joint.inverse(), pl + ql, n);
            if (std::abs(coeff) == 0.0) continue;
            for (int64_t col = 0; col < sd; ++col)
              tw(permute_registers(col, joint, pl + ql, n), col) += coeff;
          }
        Z.block(a * sd, b * sd, sd, sd) = tw;
      }
    out += iso.matrix.adjoint() * Z * iso.matrix;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vectorized moment-channel matrices.  vec stacks rows, so that
// (A (x) conj(B)) vec(X) = vec(A X B^dag); asserted by a unit test.
// ---------------------------------------------------------------------------

inline Vec vec_op(const Mat& X) {
  Vec v(X.rows() * X.cols());
  for (int64_t r = 0; r < X.rows(); ++r)
    for (int64_t c = 0; c < X.cols(); ++c) v(r * X.cols() + c) = X(r, c);
  return v;
}

inline Mat unvec_op(const Vec& v, int64_t d) {
  Mat X(d, d);
  for (int64_t r = 0; r < d; ++r)
    for (int64_t c = 0; c < d; ++c) X(r, c) = v(r * d + c);
  return X;
}

// M_H = matrix of the exact Haar twirl in the vec basis.
inline Mat haar_moment_matrix(int n, int k) {
  const int64_t d = int64_t(1) << (n * k);
  if (d * d > (int64_t(1) << 14))
    throw std::invalid_argument("haar_moment_matrix: size limit exceeded (nk <= 3)");
  WeingartenTable table = weingarten_table(k, double(int64_t(1) << n));
  Mat M(d * d, d * d);
  Mat E = Mat::Zero(d, d);
  for (int64_t r = 0; r < d; ++r)
    for (int64_t c = 0; c < d; ++c) {
      E(r, c) = 1.0;
      M.col(r * d + c) = vec_op(haar_twirl_exact(E, k, n, &table));
      E(r, c) = 0.0;
    }
  return M;
}

// Sample-mean moment matrix E[U^{(x)k} (x) conj(U^{(x)k})].
inline Mat ensemble_moment_matrix(const std::vector<Mat>& unitaries, int n, int k) {
  const int64_t d = int64_t(1) << (n * k);
  Mat M = Mat::Zero(d * d, d * d);
  for (const auto& U : unitaries) {
    Mat W = U;
    for (int i = 1; i < k; ++i) W = kron(W, U);
    M += kron(W, W.conjugate());
  }
  M /= double(unitaries.size());
  return M;
}

inline double essential_norm(const Mat& M_ens, const Mat& M_haar) {
  return spectral_norm(M_ens - M_haar);
}

// ---------------------------------------------------------------------------
// Closed-form error-bound calculators
// ---------------------------------------------------------------------------

struct TranslationBounds {
  double eps_r_bound = 0.0;  // (4^{n(p+q)} / p!q!) 2 eps_a + 2 (p+q)^2 / 2^n
  double eps_m_upper = 0.0;  // 2 * eps_r_bound
  bool valid_regime = false;  // 2 (p+q)^2 <= 2^n
};

inline double factorial(int m) {
  double f = 1;
  for (int i = 2; i <= m; ++i) f *= i;
  return f;
}

inline TranslationBounds error_translation_bounds(int n, int p, int q, double eps_additive) {
  TranslationBounds b;
  const double k = p + q;
  const double pow4 = std::pow(4.0, double(n) * k);
  const double pow2 = std::pow(2.0, double(n));
  b.eps_r_bound = (pow4 / (factorial(p) * factorial(q))) * 2.0 * eps_additive + 2.0 * k * k / pow2;
  b.eps_m_upper = 2.0 * b.eps_r_bound;
  b.valid_regime = 2.0 * k * k <= pow2;
  return b;
}

struct BudgetBreakdown {
  std::vector<double> terms;
  double total = 0.0;
};

// Four-step trace-distance budget for the LRFC ensemble on N = 2^n with a
// strong approximate 2-design of additive error eps2 for C, D:
//   (1) 18 t(t+1) / N^{1/8}
//   (2) sqrt(70) t(t-1) / N^{1/8} + 2 t(t+1) / N^{1/4} + 4 t^{5/4} eps2^{1/4}
//   (3) t(t+1) / 2N
//   (4) t^2 / N^{1/16} + t^{5/8} eps2^{1/8}
// Step 4 is stated asymptotically in the source analysis; the Landau
// constants are set to 1 here.
inline BudgetBreakdown lrfc_error_budget(double t, double N, double eps2 = 0.0) {
  BudgetBreakdown b;
  b.terms.push_back(18.0 * t * (t + 1) / std::pow(N, 0.125));
  b.terms.push_back(std::sqrt(70.0) * t * (t - 1) / std::pow(N, 0.125) +
                    2.0 * t * (t + 1) / std::pow(N, 0.25) +
                    4.0 * std::pow(t, 1.25) * std::pow(eps2, 0.25));
  b.terms.push_back(t * (t + 1) / (2.0 * N));
  b.terms.push_back(t * t / std::pow(N, 1.0 / 16.0) +
                    std::pow(t, 0.625) * std::pow(eps2, 0.125));
  for (double v : b.terms) b.total += v;
  return b;
}

// Five-step budget for gluing U_bc U_ab into U_abc between 2-designs of
// additive error eps2.
inline BudgetBreakdown gluing_error_budget(double t, double N_abc, double N_ab, double N_bc,
                                           double N_min, double eps2 = 0.0) {
  BudgetBreakdown b;
  const double e4 = std::pow(eps2, 0.25);
  b.terms.push_back(9.0 * t * (t + 2) / std::pow(N_abc, 0.125) + 2.0 * std::pow(t, 0.25) * e4);
  b.terms.push_back(17.0 * t * t / std::pow(N_abc, 0.125) +
                    7.0 * std::pow(t, 1.5) / std::sqrt(N_min) +
                    6.0 * std::pow(t, 1.25) * e4);
  b.terms.push_back(t * t / N_ab + t * t / N_bc);
  b.terms.push_back(2.0 * t *
                    std::sqrt(17.0 * t * t / std::pow(N_abc, 0.125) +
                              7.0 * std::pow(t, 1.5) / std::sqrt(N_min) +
                              2.0 * t * t / N_ab + 2.0 * t * t / N_bc +
                              9.0 * t / std::pow(N_abc, 0.125) +
                              8.0 * std::pow(t, 1.25) * e4));
  b.terms.push_back(9.0 * t * (t + 1) / std::pow(N_ab, 0.125) +
                    9.0 * t * (t + 1) / std::pow(N_bc, 0.125));
  for (double v : b.terms) b.total += v;
  return b;
}

// Scrambled two-layer ensemble: iterate the gluing step m = n/xi times with
// per-block error eps_block; the per-step remainder is evaluated at the
// smallest sizes (N_ab = N_bc = 2^{2 xi}, N_abc = 2^{3 xi}, N_min = 2^xi),
// which dominates every later iteration.
inline BudgetBreakdown two_layer_error_budget(double n, double k, double xi,
                                              double eps_block, double eps2 = 0.0) {
  BudgetBreakdown b;
  const double m = n / xi;
  auto glue = gluing_error_budget(k, std::pow(2.0, 3 * xi), std::pow(2.0, 2 * xi),
                                  std::pow(2.0, 2 * xi), std::pow(2.0, xi), eps2);
  b.terms.push_back(m * eps_block);
  b.terms.push_back(m * glue.total);
  for (double v : b.terms) b.total += v;
  return b;
}

// Theorem-level sufficient patch size: xi >= (16/3) log2(n k^2 / eps).
inline double two_layer_xi_threshold(double n, double k, double eps) {
  return (16.0 / 3.0) * std::log2(n * k * k / eps);
}

// ---------------------------------------------------------------------------
// Weingarten submatrix over block-preserving permutations (the PTPs that are
// honest permutations pi_L (+) pi_R).
// ---------------------------------------------------------------------------

inline std::vector<Permutation> block_permutations(int p, int q) {
  auto left = all_permutations(std::max(p, 1));
  auto right = all_permutations(std::max(q, 1));
  if (p == 0) left = {Permutation::identity(0)};
  if (q == 0) right = {Permutation::identity(0)};
  std::vector<Permutation> out;
  for (const auto& l : left)
    for (const auto& r : right) {
      Permutation j;
      j.images.resize(p + q);
      for (int i = 0; i < p; ++i) j.images[i] = l.images[i];
      for (int i = 0; i < q; ++i) j.images[p + i] = p + r.images[i];
      out.push_back(j);
    }
  return out;
}

// (1/p!q!) sum_{pi,tp} | delta - D^{-(p+q)} [Wg|_perm^{-1}]_{pi,tp} |
inline double inverse_wg_submatrix_deviation(int p, int q, double D) {
  WeingartenTable t = weingarten_table(p + q, D);
  auto blocks = block_permutations(p, q);
  const int f = static_cast<int>(blocks.size());
  RMat sub(f, f);
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j)
      sub(i, j) = t.wg(t.index_of(blocks[i]), t.index_of(blocks[j]));
  RMat inv = sub.inverse();
  const double scale = std::pow(D, -(p + q));
  double acc = 0.0;
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < f; ++j)
      acc += std::abs((i == j ? 1.0 : 0.0) - scale * inv(i, j));
  return acc / (factorial(p) * factorial(q));
}

}  // namespace haarlab::wg
