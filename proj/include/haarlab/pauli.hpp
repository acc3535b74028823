#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haarlab/linalg.hpp"

namespace haarlab {

// Pauli string over n qubits; letters[q] in {0:I, 1:X, 2:Y, 3:Z}.
struct PauliString {
  int num_qubits = 0;
  std::vector<uint8_t> letters;

  PauliString() = default;
  explicit PauliString(int n) : num_qubits(n), letters(n, 0) {}

  static PauliString from_index(int n, uint64_t index) {
    PauliString p(n);
    for (int q = n - 1; q >= 0; --q) {
      p.letters[q] = index & 3;
      index >>= 2;
    }
    return p;
  }

  uint64_t to_index() const {
    uint64_t idx = 0;
    for (int q = 0; q < num_qubits; ++q) idx = (idx << 2) | letters[q];
    return idx;
  }

  int weight() const {
    int w = 0;
    for (uint8_t l : letters) w += (l != 0);
    return w;
  }

  std::string to_string() const {
    static const char names[] = "IXYZ";
    std::string s;
    for (uint8_t l : letters) s.push_back(names[l]);
    return s;
  }

  // Bit masks over the basis index (qubit q at bit n-1-q).
  uint64_t x_mask() const {
    uint64_t m = 0;
    for (int q = 0; q < num_qubits; ++q)
      if (letters[q] == 1 || letters[q] == 2) m |= uint64_t(1) << (num_qubits - 1 - q);
    return m;
  }
  uint64_t z_mask() const {
    uint64_t m = 0;
    for (int q = 0; q < num_qubits; ++q)
      if (letters[q] == 3 || letters[q] == 2) m |= uint64_t(1) << (num_qubits - 1 - q);
    return m;
  }
  int y_count() const {
    int c = 0;
    for (uint8_t l : letters) c += (l == 2);
    return c;
  }
};

inline int popcount64(uint64_t x) { return __builtin_popcountll(x); }

// P|k> = i^{#Y} (-1)^{popcount(k & mz)} |k ^ mx>
inline StateVector apply_pauli(const StateVector& state, const PauliString& p) {
  const uint64_t mx = p.x_mask(), mz = p.z_mask();
  static const cplx iphase[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
  const cplx ph = iphase[p.y_count() & 3];
  StateVector out;
  out.num_qubits = state.num_qubits;
  out.amps = Vec::Zero(state.amps.size());
  for (int64_t k = 0; k < state.amps.size(); ++k) {
    cplx a = state.amps(k);
    if (a == cplx(0.0, 0.0)) continue;
    double sign = (popcount64(uint64_t(k) & mz) & 1) ? -1.0 : 1.0;
    out.amps(int64_t(uint64_t(k) ^ mx)) += ph * sign * a;
  }
  return out;
}

inline Mat pauli_matrix(const PauliString& p) {
  const int64_t N = dim_of(p.num_qubits);
  const uint64_t mx = p.x_mask(), mz = p.z_mask();
  static const cplx iphase[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
  const cplx ph = iphase[p.y_count() & 3];
  Mat m = Mat::Zero(N, N);
  for (int64_t k = 0; k < N; ++k) {
    double sign = (popcount64(uint64_t(k) & mz) & 1) ? -1.0 : 1.0;
    m(int64_t(uint64_t(k) ^ mx), k) = ph * sign;
  }
  return m;
}

// tr(P * op) evaluated in O(2^n) using the signed-permutation form of P.
inline cplx pauli_op_trace(const PauliString& p, const Mat& op) {
  const int64_t N = op.rows();
  const uint64_t mx = p.x_mask(), mz = p.z_mask();
  static const cplx iphase[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
  const cplx ph = iphase[p.y_count() & 3];
  cplx acc = 0.0;
  for (int64_t k = 0; k < N; ++k) {
    double sign = (popcount64(uint64_t(k) & mz) & 1) ? -1.0 : 1.0;
    acc += sign * op(k, int64_t(uint64_t(k) ^ mx));
  }
  return ph * acc;
}

// Coefficients c_P = tr(P op)/2^n for all 4^n Pauli strings, indexed by
// PauliString::to_index().
inline std::vector<cplx> pauli_expand(const Mat& op, int n) {
  if (n > 8) throw std::invalid_argument("pauli_expand: n too large for dense expansion");
  if (op.rows() != dim_of(n)) throw std::invalid_argument("pauli_expand: dimension mismatch");
  const uint64_t P = uint64_t(1) << (2 * n);
  std::vector<cplx> coeffs(P);
  const double inv = 1.0 / double(dim_of(n));
  for (uint64_t i = 0; i < P; ++i)
    coeffs[i] = pauli_op_trace(PauliString::from_index(n, i), op) * inv;
  return coeffs;
}

inline Mat pauli_reconstruct(const std::vector<cplx>& coeffs, int n) {
  const int64_t N = dim_of(n);
  static const cplx iphase[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
  Mat out = Mat::Zero(N, N);
  for (uint64_t i = 0; i < coeffs.size(); ++i) {
    if (std::abs(coeffs[i]) == 0.0) continue;
    PauliString p = PauliString::from_index(n, i);
    const uint64_t mx = p.x_mask(), mz = p.z_mask();
    const cplx c = coeffs[i] * iphase[p.y_count() & 3];
    for (int64_t k = 0; k < N; ++k) {
      double sign = (popcount64(uint64_t(k) & mz) & 1) ? -1.0 : 1.0;
      out(int64_t(uint64_t(k) ^ mx), k) += sign * c;
    }
  }
  return out;
}

// P(w) = sum_{|P| = w} |c_P|^2, weights 0..n.
inline std::vector<double> pauli_weight_distribution(const std::vector<cplx>& coeffs, int n) {
  std::vector<double> dist(n + 1, 0.0);
  for (uint64_t i = 0; i < coeffs.size(); ++i) {
    double a = std::norm(coeffs[i]);
    if (a == 0.0) continue;
    dist[PauliString::from_index(n, i).weight()] += a;
  }
  return dist;
}

// Haar mean size distribution of a conjugated non-identity Pauli:
// P_H(w) = 3^w C(n,w) / (4^n - 1) for w >= 1.
inline std::vector<double> haar_size_distribution(int n) {
  std::vector<double> dist(n + 1, 0.0);
  double denom = std::pow(4.0, n) - 1.0;
  double binom = 1.0;
  double pow3 = 1.0;
  for (int w = 1; w <= n; ++w) {
    binom = binom * double(n - w + 1) / double(w);
    pow3 *= 3.0;
    dist[w] = pow3 * binom / denom;
  }
  return dist;
}

}  // namespace haarlab
