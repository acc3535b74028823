#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

#include "haarlab/rng.hpp"

namespace haarlab {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;

// Basis convention used everywhere: qubit 0 is the most significant bit of
// the basis index.  For a register of k n-qubit blocks, block 0 is the most
// significant block.

struct StateVector {
  int num_qubits = 0;
  Vec amps;

  static StateVector zero(int n) {
    StateVector s;
    s.num_qubits = n;
    s.amps = Vec::Zero(int64_t(1) << n);
    s.amps(0) = 1.0;
    return s;
  }

  static StateVector basis(int n, uint64_t index) {
    StateVector s;
    s.num_qubits = n;
    s.amps = Vec::Zero(int64_t(1) << n);
    s.amps(index) = 1.0;
    return s;
  }

  double norm() const { return amps.norm(); }

  void normalize() { amps /= amps.norm(); }
};

inline int64_t dim_of(int n) { return int64_t(1) << n; }

// (1/sqrt(2^n)) sum_x |x>|x> on 2n qubits; the first n qubits hold the left
// copy.
inline StateVector epr_state(int n) {
  if (n < 1) throw std::invalid_argument("epr_state: n must be >= 1");
  StateVector s;
  s.num_qubits = 2 * n;
  int64_t N = dim_of(n);
  s.amps = Vec::Zero(N * N);
  double a = 1.0 / std::sqrt(double(N));
  for (int64_t x = 0; x < N; ++x) s.amps(x * N + x) = a;
  return s;
}

// Applies `gate` (dimension 2^t) to the listed qubits, identity elsewhere.
// targets[0] is the most significant bit of the gate's sub-index.
inline void apply_gate_inplace(StateVector& state, const Mat& gate,
                               const std::vector<int>& targets) {
  const int n = state.num_qubits;
  const int t = static_cast<int>(targets.size());
  if (gate.rows() != (int64_t(1) << t) || gate.cols() != gate.rows())
    throw std::invalid_argument("apply_gate: gate dimension mismatch");
  uint64_t seen = 0;
  for (int q : targets) {
    if (q < 0 || q >= n) throw std::invalid_argument("apply_gate: target out of range");
    if (seen & (uint64_t(1) << q)) throw std::invalid_argument("apply_gate: repeated target");
    seen |= uint64_t(1) << q;
  }
  std::vector<int64_t> tbit(t);
  for (int i = 0; i < t; ++i) tbit[i] = int64_t(1) << (n - 1 - targets[i]);
  const int64_t subdim = int64_t(1) << t;
  const int64_t N = state.amps.size();

  Vec scratch(subdim);
  // Iterate over base indices with all target bits cleared.
  uint64_t tmask = 0;
  for (int i = 0; i < t; ++i) tmask |= uint64_t(tbit[i]);
  for (int64_t base = 0; base < N; ++base) {
    if (base & tmask) continue;
    for (int64_t s = 0; s < subdim; ++s) {
      int64_t idx = base;
      for (int i = 0; i < t; ++i)
        if (s & (int64_t(1) << (t - 1 - i))) idx |= tbit[i];
      scratch(s) = state.amps(idx);
    }
    for (int64_t s = 0; s < subdim; ++s) {
      cplx acc = 0.0;
      for (int64_t s2 = 0; s2 < subdim; ++s2) acc += gate(s, s2) * scratch(s2);
      int64_t idx = base;
      for (int i = 0; i < t; ++i)
        if (s & (int64_t(1) << (t - 1 - i))) idx |= tbit[i];
      state.amps(idx) = acc;
    }
  }
}

inline StateVector apply_gate(const StateVector& state, const Mat& gate,
                              const std::vector<int>& targets) {
  StateVector out = state;
  apply_gate_inplace(out, gate, targets);
  return out;
}

// Same gate action applied to every column of a matrix (columns as states).
inline void apply_gate_columns(Mat& M, int num_qubits, const Mat& gate,
                               const std::vector<int>& targets) {
  StateVector tmp;
  tmp.num_qubits = num_qubits;
  for (int64_t c = 0; c < M.cols(); ++c) {
    tmp.amps = M.col(c);
    apply_gate_inplace(tmp, gate, targets);
    M.col(c) = tmp.amps;
  }
}

// Partial trace keeping `keep` (ordered, ascending output significance as
// listed) out of total_qubits.
inline Mat partial_trace(const Mat& op, const std::vector<int>& keep, int total_qubits) {
  const int64_t N = dim_of(total_qubits);
  if (op.rows() != N || op.cols() != N)
    throw std::invalid_argument("partial_trace: dimension mismatch");
  const int k = static_cast<int>(keep.size());
  for (int q : keep)
    if (q < 0 || q >= total_qubits) throw std::invalid_argument("partial_trace: keep out of range");
  std::vector<int> traced;
  for (int q = 0; q < total_qubits; ++q) {
    bool kept = false;
    for (int kq : keep) kept = kept || (kq == q);
    if (!kept) traced.push_back(q);
  }
  const int m = static_cast<int>(traced.size());
  const int64_t K = int64_t(1) << k, M = int64_t(1) << m;
  auto build = [&](int64_t kept_bits, int64_t traced_bits) {
    int64_t idx = 0;
    for (int i = 0; i < k; ++i)
      if (kept_bits & (int64_t(1) << (k - 1 - i))) idx |= int64_t(1) << (total_qubits - 1 - keep[i]);
    for (int i = 0; i < m; ++i)
      if (traced_bits & (int64_t(1) << (m - 1 - i))) idx |= int64_t(1) << (total_qubits - 1 - traced[i]);
    return idx;
  };
  Mat out = Mat::Zero(K, K);
  for (int64_t r = 0; r < K; ++r)
    for (int64_t c = 0; c < K; ++c) {
      cplx acc = 0.0;
      for (int64_t tbits = 0; tbits < M; ++tbits)
        acc += op(build(r, tbits), build(c, tbits));
      out(r, c) = acc;
    }
  return out;
}

// Transposes the matrix indices on `subset`; exact involution.
inline Mat partial_transpose(const Mat& op, const std::vector<int>& subset, int total_qubits) {
  const int64_t N = dim_of(total_qubits);
  if (op.rows() != N || op.cols() != N)
    throw std::invalid_argument("partial_transpose: dimension mismatch");
  uint64_t mask = 0;
  for (int q : subset) {
    if (q < 0 || q >= total_qubits)
      throw std::invalid_argument("partial_transpose: subset out of range");
    mask |= uint64_t(1) << (total_qubits - 1 - q);
  }
  Mat out(N, N);
  for (int64_t r = 0; r < N; ++r)
    for (int64_t c = 0; c < N; ++c) {
      int64_t r2 = (r & ~mask) | (c & mask);
      int64_t c2 = (c & ~mask) | (r & mask);
      out(r2, c2) = op(r, c);
    }
  return out;
}

// rho_keep of a pure state, without forming the full density matrix.
inline Mat reduced_density_of_state(const StateVector& s, const std::vector<int>& keep) {
  const int n = s.num_qubits;
  const int k = static_cast<int>(keep.size());
  std::vector<int> traced;
  for (int q = 0; q < n; ++q) {
    bool kept = false;
    for (int kq : keep) kept = kept || (kq == q);
    if (!kept) traced.push_back(q);
  }
  const int m = static_cast<int>(traced.size());
  const int64_t K = int64_t(1) << k, M = int64_t(1) << m;
  auto build = [&](int64_t kept_bits, int64_t traced_bits) {
    int64_t idx = 0;
    for (int i = 0; i < k; ++i)
      if (kept_bits & (int64_t(1) << (k - 1 - i))) idx |= int64_t(1) << (n - 1 - keep[i]);
    for (int i = 0; i < m; ++i)
      if (traced_bits & (int64_t(1) << (m - 1 - i))) idx |= int64_t(1) << (n - 1 - traced[i]);
    return idx;
  };
  Mat rho = Mat::Zero(K, K);
  for (int64_t t = 0; t < M; ++t) {
    for (int64_t r = 0; r < K; ++r) {
      cplx ar = s.amps(build(r, t));
      if (ar == cplx(0.0, 0.0)) continue;
      for (int64_t c = 0; c < K; ++c) rho(r, c) += ar * std::conj(s.amps(build(c, t)));
    }
  }
  return rho;
}

inline double hermiticity_defect(const Mat& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

// 0.5 * ||a - b||_1 via the eigenvalues of the Hermitian difference.
inline double trace_distance(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("trace_distance: dimension mismatch");
  Mat d = a - b;
  if (hermiticity_defect(d) > 1e-8)
    throw std::invalid_argument("trace_distance: inputs not Hermitian within tolerance");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (d + d.adjoint()),
                                        Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

struct PsdReport {
  bool psd = false;
  double min_eigenvalue = 0.0;
};

inline PsdReport psd_check(const Mat& a, double tol) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.adjoint()),
                                        Eigen::EigenvaluesOnly);
  PsdReport r;
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  r.psd = r.min_eigenvalue >= -tol;
  return r;
}

// PSD check usable at large dimension: LDLT inertia of a + tol*I, with a
// power-iteration estimate of the most negative eigenvalue on failure.
inline PsdReport psd_check_large(const Mat& a, double tol) {
  if (a.rows() <= 1024) return psd_check(a, tol);
  Mat h = 0.5 * (a + a.adjoint());
  Eigen::LDLT<Mat> ldlt(h + tol * Mat::Identity(h.rows(), h.cols()));
  PsdReport r;
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    auto d = ldlt.vectorD();
    for (int64_t i = 0; i < d.size(); ++i)
      if (d(i).real() < -tol * 16) ok = false;
  }
  r.psd = ok;
  if (!ok) {
    // Estimate min eigenvalue by shifted power iteration.
    double upper = h.cwiseAbs().rowwise().sum().maxCoeff();
    Vec v = Vec::Random(h.rows());
    v.normalize();
    for (int it = 0; it < 200; ++it) {
      v = upper * v - h * v;
      v.normalize();
    }
    r.min_eigenvalue = (v.adjoint() * h * v)(0).real();
  } else {
    r.min_eigenvalue = 0.0;
  }
  return r;
}

inline double spectral_norm(const Mat& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(a.adjoint() * a), Eigen::EigenvaluesOnly);
  double m = es.eigenvalues().maxCoeff();
  return m > 0 ? std::sqrt(m) : 0.0;
}

inline double unitary_defect(const Mat& u) {
  return spectral_norm(Mat(u.adjoint() * u - Mat::Identity(u.rows(), u.cols())));
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int64_t i = 0; i < a.rows(); ++i)
    for (int64_t j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Haar-distributed unitary: complex Ginibre + QR with the R-diagonal phase
// correction.
inline Mat haar_unitary(int64_t dim, Rng& rng) {
  Mat a(dim, dim);
  for (int64_t i = 0; i < dim; ++i)
    for (int64_t j = 0; j < dim; ++j)
      a(i, j) = cplx(rng.gaussian(), rng.gaussian());
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int64_t j = 0; j < dim; ++j) {
    cplx d = r(j, j);
    double ad = std::abs(d);
    q.col(j) *= (ad > 0 ? d / ad : cplx(1.0, 0.0));
  }
  return q;
}

inline Mat random_hermitian(int64_t dim, Rng& rng) {
  Mat a(dim, dim);
  for (int64_t i = 0; i < dim; ++i)
    for (int64_t j = 0; j < dim; ++j)
      a(i, j) = cplx(rng.gaussian(), rng.gaussian());
  return 0.5 * (a + a.adjoint());
}

inline Vec random_state(int64_t dim, Rng& rng) {
  Vec v(dim);
  for (int64_t i = 0; i < dim; ++i) v(i) = cplx(rng.gaussian(), rng.gaussian());
  v.normalize();
  return v;
}

}  // namespace haarlab
