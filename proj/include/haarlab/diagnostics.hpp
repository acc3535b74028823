#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include "haarlab/circuits.hpp"
#include "haarlab/pauli.hpp"
#include "haarlab/weingarten.hpp"

namespace haarlab::diag {

// ---------------------------------------------------------------------------
// Sample-parallel driver: workers write into per-sample slots, so results are
// independent of scheduling.  Worker count from HAARLAB_WORKERS (default 1).
// ---------------------------------------------------------------------------

inline int worker_count() {
  const char* env = std::getenv("HAARLAB_WORKERS");
  if (!env) return 1;
  int w = std::atoi(env);
  return w < 1 ? 1 : w;
}

template <typename F>
inline void parallel_samples(int count, F&& fn) {
  int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next(0);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

struct MeanStd {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanStd mean_and_stderr(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= double(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - r.mean) * (x - r.mean);
  if (xs.size() > 1) var /= double(xs.size() - 1);
  r.std_error = std::sqrt(var / double(xs.size()));
  return r;
}

struct DiagnosticResult {
  std::string name;
  json spec;
  json params;
  double estimate = 0.0;
  double std_error = 0.0;
  double haar_ref = 0.0;
  int n_samples = 0;
  uint64_t seed = 0;
  json extras;

  json to_json() const {
    return json{{"name", name},         {"spec", spec},
                {"params", params},     {"estimate", estimate},
                {"std_error", std_error}, {"haar_ref", haar_ref},
                {"n_samples", n_samples}, {"seed", seed},
                {"extras", extras}};
  }
};

// Unitary provider: sample index -> dense unitary.
using Sampler = std::function<Mat(int)>;

inline Mat sample_dense(const circuits::EnsembleSpec& spec, uint64_t master_seed, int index) {
  return circuits::dense_matrix(circuits::sample_circuit(spec, Rng::derive(master_seed, index)));
}

inline Sampler ensemble_sampler(const circuits::EnsembleSpec& spec, uint64_t seed) {
  return [spec, seed](int i) { return sample_dense(spec, seed, i); };
}

inline Sampler fixed_sampler(const Mat& u) {
  return [u](int) { return u; };
}

// ---------------------------------------------------------------------------
// OTOCs
// ---------------------------------------------------------------------------

enum class CorrelatorOrdering { time_ordered, out_of_time_ordered };

// Time-ordered:      <psi| P_2k U^dag ... P_{k+1} U^dag P_k U ... P_1 U |psi>
// Out-of-time-order: <psi| P_2k U^dag P_{2k-1} U ... P_2 U^dag P_1 U |psi>
inline cplx otoc(const Mat& U, const std::vector<PauliString>& paulis, const StateVector& psi,
                 CorrelatorOrdering ordering) {
  const int n = psi.num_qubits;
  if (U.rows() != dim_of(n)) throw std::invalid_argument("otoc: dimension mismatch");
  if (paulis.size() % 2) throw std::invalid_argument("otoc: need an even number of Paulis");
  const int k = static_cast<int>(paulis.size()) / 2;
  StateVector v = psi;
  Mat Udag = U.adjoint();
  auto apply_op = [&](const Mat& m) {
    StateVector tmp;
    tmp.num_qubits = n;
    tmp.amps = m * v.amps;
    v = std::move(tmp);
  };
  if (ordering == CorrelatorOrdering::time_ordered) {
    for (int i = 0; i < k; ++i) {
      apply_op(U);
      v = apply_pauli(v, paulis[i]);
    }
    for (int i = k; i < 2 * k; ++i) {
      apply_op(Udag);
      v = apply_pauli(v, paulis[i]);
    }
  } else {
    for (int i = 0; i < 2 * k; ++i) {
      apply_op(i % 2 == 0 ? U : Udag);
      v = apply_pauli(v, paulis[i]);
    }
  }
  return (psi.amps.adjoint() * v.amps)(0);
}

inline PauliString random_local_pauli(int n, int locality, Rng& rng) {
  PauliString p(n);
  int weight = 1 + int(rng.uniform_below(uint64_t(locality)));
  std::vector<int> qubits;
  while (int(qubits.size()) < weight) {
    int q = int(rng.uniform_below(uint64_t(n)));
    bool fresh = true;
    for (int x : qubits) fresh = fresh && x != q;
    if (fresh) qubits.push_back(q);
  }
  for (int q : qubits) p.letters[q] = 1 + uint8_t(rng.uniform_below(3));
  return p;
}

// Surveys |C| over random local 2k-point correlators (both orderings).
inline DiagnosticResult correlator_survey_core(const Sampler& sample, int n, int locality, int k,
                                               int samples, uint64_t seed, int tuples,
                                               double tail_threshold) {
  StateVector psi = StateVector::zero(n);
  tuples = std::min<int64_t>(tuples, 10'000);
  std::vector<double> max_abs(samples, 0.0);
  std::vector<double> tail_count(samples, 0.0);
  parallel_samples(samples, [&](int s) {
    Mat U = sample(s);
    Rng trng(Rng::derive(seed ^ 0xABCD, s));
    double mx = 0.0;
    int tail = 0;
    for (int t = 0; t < tuples; ++t) {
      std::vector<PauliString> ps;
      for (int i = 0; i < 2 * k; ++i) ps.push_back(random_local_pauli(n, locality, trng));
      for (auto ordering :
           {CorrelatorOrdering::time_ordered, CorrelatorOrdering::out_of_time_ordered}) {
        double c = std::abs(otoc(U, ps, psi, ordering));
        mx = std::max(mx, c);
        if (c > tail_threshold) ++tail;
      }
    }
    max_abs[s] = mx;
    tail_count[s] = double(tail) / double(2 * tuples);
  });
  DiagnosticResult r;
  r.name = "correlator_survey";
  r.params = json{{"locality", locality}, {"k", k}, {"tuples", tuples},
                  {"tail_threshold", tail_threshold}};
  double mx = 0.0;
  for (double v : max_abs) mx = std::max(mx, v);
  r.estimate = mx;
  auto tail = mean_and_stderr(tail_count);
  r.extras = json{{"tail_fraction", tail.mean}, {"tail_fraction_se", tail.std_error}};
  r.haar_ref = std::pow(2.0, -0.5 * n);
  r.n_samples = samples;
  r.seed = seed;
  return r;
}

inline DiagnosticResult correlator_survey(const circuits::EnsembleSpec& spec, int locality, int k,
                                          int samples, uint64_t seed, int tuples = 64,
                                          double tail_threshold = 0.2) {
  auto r = correlator_survey_core(ensemble_sampler(spec, seed), spec.n, locality, k, samples,
                                  seed, tuples, tail_threshold);
  r.spec = spec.to_json();
  return r;
}

// ---------------------------------------------------------------------------
// Operator size distribution
// ---------------------------------------------------------------------------

inline std::vector<double> operator_size_distribution(const Mat& U, const PauliString& O) {
  const int n = O.num_qubits;
  if (n > 7) throw std::invalid_argument("operator_size_distribution: n <= 7 required");
  Mat heis = U * pauli_matrix(O) * U.adjoint();
  return pauli_weight_distribution(pauli_expand(heis, n), n);
}

// Mean size distribution over the ensemble plus its TVD to the Haar profile
// P_H(w) = 3^w C(n,w) / (4^n - 1).
inline DiagnosticResult size_distribution_tvd_core(const Sampler& sample, int n, int samples,
                                                   uint64_t seed) {
  PauliString z0(n);
  z0.letters[0] = 3;
  std::vector<std::vector<double>> dists(samples);
  parallel_samples(samples,
                   [&](int s) { dists[s] = operator_size_distribution(sample(s), z0); });
  auto haar = haar_size_distribution(n);
  std::vector<double> mean(n + 1, 0.0);
  for (const auto& d : dists)
    for (int w = 0; w <= n; ++w) mean[w] += d[w] / double(samples);
  double tvd = 0.0;
  double se_budget = 0.0;
  json mean_j = json::array(), se_j = json::array();
  for (int w = 0; w <= n; ++w) {
    std::vector<double> col(samples);
    for (int s = 0; s < samples; ++s) col[s] = dists[s][w];
    auto ms = mean_and_stderr(col);
    tvd += std::abs(mean[w] - haar[w]);
    se_budget += ms.std_error;
    mean_j.push_back(mean[w]);
    se_j.push_back(ms.std_error);
  }
  DiagnosticResult r;
  r.name = "size_distribution_tvd";
  r.estimate = tvd;
  r.std_error = se_budget;  // sum of per-bin standard errors
  r.haar_ref = 0.0;
  r.n_samples = samples;
  r.seed = seed;
  r.extras = json{{"mean_distribution", mean_j}, {"bin_std_errors", se_j}};
  return r;
}

inline DiagnosticResult size_distribution_tvd(const circuits::EnsembleSpec& spec, int samples,
                                              uint64_t seed) {
  auto r = size_distribution_tvd_core(ensemble_sampler(spec, seed), spec.n, samples, seed);
  r.spec = spec.to_json();
  return r;
}

// ---------------------------------------------------------------------------
// Operator-spreading TVD (strong 2-design criterion)
// ---------------------------------------------------------------------------

// Estimates p_E(Q; P) = E |<Q|(U (x) U*)|P>|^2 = E |tr(Q U P U^dag)/2^n|^2 and
// reports max_P TVD(p_E(.;P), uniform).  Error bars from batch means.
inline DiagnosticResult op_spreading_tvd_core(const Sampler& sample, int n, int samples,
                                              uint64_t seed, int max_paulis = 0) {
  if (n > 5) throw std::invalid_argument("op_spreading_tvd: n <= 5 required");
  const uint64_t npauli = (uint64_t(1) << (2 * n)) - 1;  // non-identity count
  uint64_t p_count = npauli;
  if (max_paulis > 0 && uint64_t(max_paulis) < npauli) p_count = uint64_t(max_paulis);
  const int batches = 10;
  std::vector<std::vector<std::vector<double>>> rows(
      batches, std::vector<std::vector<double>>(p_count, std::vector<double>(npauli, 0.0)));
  std::vector<int> batch_counts(batches, 0);
  std::vector<Mat> pmats(p_count);
  for (uint64_t pi = 0; pi < p_count; ++pi)
    pmats[pi] = pauli_matrix(PauliString::from_index(n, pi + 1));
  // Chunked: per-sample rows computed in parallel, accumulated sequentially so
  // the floating-point sum order stays deterministic.
  const int chunk = 32;
  std::vector<std::vector<std::vector<double>>> sample_rows(chunk);
  for (int base = 0; base < samples; base += chunk) {
    int cnt = std::min(chunk, samples - base);
    parallel_samples(cnt, [&](int off) {
      Mat U = sample(base + off);
      Mat Ud = U.adjoint();
      auto& mine = sample_rows[off];
      mine.assign(p_count, std::vector<double>(npauli, 0.0));
      for (uint64_t pi = 0; pi < p_count; ++pi) {
        Mat heis = U * pmats[pi] * Ud;
        auto coeffs = pauli_expand(heis, n);
        for (uint64_t qi = 1; qi <= npauli; ++qi) mine[pi][qi - 1] = std::norm(coeffs[qi]);
      }
    });
    for (int off = 0; off < cnt; ++off) {
      int b = (base + off) % batches;
      ++batch_counts[b];
      for (uint64_t pi = 0; pi < p_count; ++pi)
        for (uint64_t qi = 0; qi < npauli; ++qi) rows[b][pi][qi] += sample_rows[off][pi][qi];
    }
  }
  const double uniform = 1.0 / double(npauli);
  auto tvd_of = [&](const std::vector<double>& row, double count) {
    double tvd = 0.0;
    for (double v : row) tvd += std::abs(v / count - uniform);
    return 0.5 * tvd;
  };
  double max_tvd = 0.0;
  for (uint64_t pi = 0; pi < p_count; ++pi) {
    std::vector<double> full(npauli, 0.0);
    for (int b = 0; b < batches; ++b)
      for (uint64_t qi = 0; qi < npauli; ++qi) full[qi] += rows[b][pi][qi];
    max_tvd = std::max(max_tvd, tvd_of(full, double(samples)));
  }
  std::vector<double> batch_vals;
  for (int b = 0; b < batches; ++b) {
    if (batch_counts[b] == 0) continue;
    double mx = 0.0;
    for (uint64_t pi = 0; pi < p_count; ++pi)
      mx = std::max(mx, tvd_of(rows[b][pi], double(batch_counts[b])));
    batch_vals.push_back(mx);
  }
  auto ms = mean_and_stderr(batch_vals);
  DiagnosticResult r;
  r.name = "op_spreading_tvd";
  r.params = json{{"paulis", p_count}};
  r.estimate = max_tvd;
  r.std_error = ms.std_error;
  r.haar_ref = 0.0;
  r.n_samples = samples;
  r.seed = seed;
  return r;
}

inline DiagnosticResult op_spreading_tvd(const circuits::EnsembleSpec& spec, int samples,
                                         uint64_t seed, int max_paulis = 0) {
  auto r = op_spreading_tvd_core(ensemble_sampler(spec, seed), spec.n, samples, seed, max_paulis);
  r.spec = spec.to_json();
  return r;
}

// ---------------------------------------------------------------------------
// Light-cone echo, conjugate-EPR and Z0-memory distinguishers
// ---------------------------------------------------------------------------

// Mean Hamming-weight fraction of a Z-basis measurement of U^dag Z_0 U |0^n>.
inline DiagnosticResult inverse_echo_core(const Sampler& sample, int n, int samples,
                                          uint64_t seed) {
  const int64_t N = dim_of(n);
  std::vector<double> vals(samples, 0.0);
  parallel_samples(samples, [&](int s) {
    Mat U = sample(s);
    Vec v = U.col(0);  // U|0^n>
    for (int64_t i = 0; i < N; ++i)
      if (i & (N >> 1)) v(i) = -v(i);  // Z on qubit 0
    Vec w = U.adjoint() * v;
    double acc = 0.0;
    for (int64_t i = 0; i < N; ++i) acc += std::norm(w(i)) * double(popcount64(uint64_t(i)));
    vals[s] = acc / double(n);
  });
  auto ms = mean_and_stderr(vals);
  DiagnosticResult r;
  r.name = "inverse_echo";
  r.estimate = ms.mean;
  r.std_error = ms.std_error;
  r.haar_ref = 0.5;
  r.n_samples = samples;
  r.seed = seed;
  return r;
}

inline DiagnosticResult inverse_echo(const circuits::EnsembleSpec& spec, int samples,
                                     uint64_t seed) {
  auto r = inverse_echo_core(ensemble_sampler(spec, seed), spec.n, samples, seed);
  r.spec = spec.to_json();
  auto cone = circuits::light_cone(circuits::sample_circuit(spec, Rng::derive(seed, 0)), 0);
  r.extras = json{{"light_cone_size", cone.size()},
                  {"light_cone_bound", double(cone.size()) / double(spec.n)}};
  return r;
}

// EPR overlap of the last qubit pair of (U (x) U*)(X_0 (x) 1)|Psi_EPR>.
inline DiagnosticResult conjugate_epr_core(const Sampler& sample, int n, int samples,
                                           uint64_t seed) {
  std::vector<int> left, right;
  for (int q = 0; q < n; ++q) left.push_back(q);
  for (int q = n; q < 2 * n; ++q) right.push_back(q);
  Mat x = Mat::Zero(2, 2);
  x(0, 1) = x(1, 0) = 1.0;
  StateVector phi = epr_state(1);
  std::vector<double> vals(samples, 0.0);
  parallel_samples(samples, [&](int s) {
    Mat U = sample(s);
    StateVector st = epr_state(n);
    apply_gate_inplace(st, x, {0});
    apply_gate_inplace(st, U, left);
    apply_gate_inplace(st, U.conjugate(), right);
    Mat rho = reduced_density_of_state(st, {n - 1, 2 * n - 1});
    vals[s] = (phi.amps.adjoint() * rho * phi.amps)(0).real();
  });
  auto ms = mean_and_stderr(vals);
  DiagnosticResult r;
  r.name = "conjugate_epr_test";
  r.estimate = ms.mean;
  r.std_error = ms.std_error;
  r.haar_ref = 0.25;
  r.n_samples = samples;
  r.seed = seed;
  return r;
}

inline DiagnosticResult conjugate_epr_test(const circuits::EnsembleSpec& spec, int samples,
                                           uint64_t seed) {
  auto r = conjugate_epr_core(ensemble_sampler(spec, seed), spec.n, samples, seed);
  r.spec = spec.to_json();
  return r;
}

// Monte-Carlo estimate of E[(1/4^n) tr(Z_0 U Z_0 U^dag)^2].
inline DiagnosticResult z0_memory_core(const Sampler& sample, int n, int samples, uint64_t seed) {
  const int64_t N = dim_of(n);
  std::vector<double> vals(samples, 0.0);
  parallel_samples(samples, [&](int s) {
    Mat U = sample(s);
    double tr = 0.0;
    for (int64_t j = 0; j < N; ++j) {
      double zj = (j & (N >> 1)) ? -1.0 : 1.0;
      double diag = 0.0;
      for (int64_t k = 0; k < N; ++k) {
        double zk = (k & (N >> 1)) ? -1.0 : 1.0;
        diag += zk * std::norm(U(j, k));
      }
      tr += zj * diag;
    }
    double scaled = tr / double(N);
    vals[s] = scaled * scaled;
  });
  auto ms = mean_and_stderr(vals);
  DiagnosticResult r;
  r.name = "z0_memory";
  r.estimate = ms.mean;
  r.std_error = ms.std_error;
  r.haar_ref = 1.0 / (std::pow(4.0, n) - 1.0);
  r.n_samples = samples;
  r.seed = seed;
  return r;
}

inline DiagnosticResult z0_memory(const circuits::EnsembleSpec& spec, int samples, uint64_t seed) {
  auto r = z0_memory_core(ensemble_sampler(spec, seed), spec.n, samples, seed);
  r.spec = spec.to_json();
  return r;
}

// ---------------------------------------------------------------------------
// Hayden-Preskill decoder (conjugate-unitary protocol, single shot)
// ---------------------------------------------------------------------------

// Registers: R(a) A(a) B(n-a) Bbar(n-a) Abar(a) Rp(a); EPR pairs R-A, B-Bbar,
// Abar-Rp; U on (A,B), U* on (Abar,Bbar); the first `radiation` qubits of the
// black-hole register are projected onto EPR with their mirrors.  Reports the
// Uhlmann fidelity sqrt(<Phi| rho_{R Rp} |Phi>) of the decoded pair and the
// post-selection probability.
inline DiagnosticResult hp_decoder_core(const Sampler& sample, int n, int input_size,
                                        int radiation, int samples, uint64_t seed) {
  const int a = input_size;
  if (a < 1 || a > n) throw std::invalid_argument("hp_decoder_fidelity: invalid input size");
  if (radiation < 0 || radiation > n)
    throw std::invalid_argument("hp_decoder_fidelity: invalid radiation");
  const int total = 2 * n + 2 * a;
  if (total > 20) throw std::invalid_argument("hp_decoder_fidelity: register too large");

  std::vector<int> regR, regA, regB, regBbar, regAbar, regRp;
  int off = 0;
  for (int i = 0; i < a; ++i) regR.push_back(off++);
  for (int i = 0; i < a; ++i) regA.push_back(off++);
  for (int i = 0; i < n - a; ++i) regB.push_back(off++);
  for (int i = 0; i < n - a; ++i) regBbar.push_back(off++);
  for (int i = 0; i < a; ++i) regAbar.push_back(off++);
  for (int i = 0; i < a; ++i) regRp.push_back(off++);
  std::vector<int> bh = regA, mirror = regAbar;
  bh.insert(bh.end(), regB.begin(), regB.end());
  mirror.insert(mirror.end(), regBbar.begin(), regBbar.end());

  Mat epr_pair_proj;
  {
    StateVector phi = epr_state(1);
    epr_pair_proj = phi.amps * phi.amps.adjoint();
  }
  std::vector<double> fid(samples, 0.0), prob(samples, 0.0);
  parallel_samples(samples, [&](int s) {
    Mat U = sample(s);
    StateVector st;
    st.num_qubits = total;
    st.amps = Vec::Zero(dim_of(total));
    const double amp = std::pow(2.0, -0.5 * (n + a));
    for (int64_t x = 0; x < dim_of(a); ++x)
      for (int64_t y = 0; y < dim_of(n - a); ++y)
        for (int64_t z = 0; z < dim_of(a); ++z) {
          int64_t idx = 0;
          auto set_bits = [&](const std::vector<int>& reg, int64_t value) {
            for (size_t i = 0; i < reg.size(); ++i)
              if (value & (int64_t(1) << (int64_t(reg.size()) - 1 - int64_t(i))))
                idx |= int64_t(1) << (total - 1 - reg[i]);
          };
          set_bits(regR, x);
          set_bits(regA, x);
          set_bits(regB, y);
          set_bits(regBbar, y);
          set_bits(regAbar, z);
          set_bits(regRp, z);
          st.amps(idx) = amp;
        }
    apply_gate_inplace(st, U, bh);
    apply_gate_inplace(st, U.conjugate(), mirror);
    for (int rq = 0; rq < radiation; ++rq)
      apply_gate_inplace(st, epr_pair_proj, {bh[rq], mirror[rq]});
    double p = st.amps.squaredNorm();
    prob[s] = p;
    if (p < 1e-12) {
      fid[s] = 0.0;
      return;
    }
    st.amps /= std::sqrt(p);
    std::vector<int> keep = regR;
    keep.insert(keep.end(), regRp.begin(), regRp.end());
    Mat rho = reduced_density_of_state(st, keep);
    StateVector target = epr_state(a);
    double overlap = (target.amps.adjoint() * rho * target.amps)(0).real();
    fid[s] = std::sqrt(std::max(0.0, overlap));
  });
  auto msf = mean_and_stderr(fid);
  auto msp = mean_and_stderr(prob);
  DiagnosticResult r;
  r.name = "hp_decoder_fidelity";
  r.params = json{{"input_size", a}, {"radiation", radiation}};
  r.estimate = msf.mean;
  r.std_error = msf.std_error;
  r.n_samples = samples;
  r.seed = seed;
  r.extras = json{{"postselection_probability", msp.mean},
                  {"postselection_probability_se", msp.std_error}};
  return r;
}

inline DiagnosticResult hp_decoder_fidelity(const circuits::EnsembleSpec& spec, int input_size,
                                            int radiation, int samples, uint64_t seed) {
  auto r = hp_decoder_core(ensemble_sampler(spec, seed), spec.n, input_size, radiation, samples,
                           seed);
  r.spec = spec.to_json();
  return r;
}

// ---------------------------------------------------------------------------
// Renyi-2 entropies (direct partial trace and the EPR reformulation)
// ---------------------------------------------------------------------------

struct Renyi2 {
  double direct = 0.0;    // -ln tr(rho_A^2)
  double epr_form = 0.0;  // via 2^{|A|} tr(P^A_EPR (rho (x) rho*)) = tr(rho_B^2)
};

inline Renyi2 renyi2_entropy(const StateVector& state, const std::vector<int>& subsystem) {
  Renyi2 out;
  Mat rho_a = reduced_density_of_state(state, subsystem);
  out.direct = -std::log(std::max(1e-300, (rho_a * rho_a).trace().real()));

  // EPR reformulation: contract both copies of the state against the EPR
  // state on subsystem A; the Frobenius weight of the Gram matrix over the
  // complement gives the purity.
  const int n = state.num_qubits;
  std::vector<int> rest;
  for (int q = 0; q < n; ++q) {
    bool in = false;
    for (int s : subsystem) in = in || s == q;
    if (!in) rest.push_back(q);
  }
  const int ka = int(subsystem.size()), kb = int(rest.size());
  const int64_t A = int64_t(1) << ka, B = int64_t(1) << kb;
  Mat w = Mat::Zero(B, B);
  auto build = [&](int64_t abits, int64_t bbits) {
    int64_t idx = 0;
    for (int i = 0; i < ka; ++i)
      if (abits & (int64_t(1) << (ka - 1 - i))) idx |= int64_t(1) << (n - 1 - subsystem[i]);
    for (int i = 0; i < kb; ++i)
      if (bbits & (int64_t(1) << (kb - 1 - i))) idx |= int64_t(1) << (n - 1 - rest[i]);
    return idx;
  };
  for (int64_t x = 0; x < A; ++x)
    for (int64_t b = 0; b < B; ++b) {
      cplx v = state.amps(build(x, b));
      if (v == cplx(0.0, 0.0)) continue;
      for (int64_t b2 = 0; b2 < B; ++b2) w(b, b2) += v * std::conj(state.amps(build(x, b2)));
    }
  double purity = 0.0;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t b2 = 0; b2 < B; ++b2) purity += std::norm(w(b, b2));
  out.epr_form = -std::log(std::max(1e-300, purity));
  return out;
}

// Operator entanglement of O(t) = U O U^dag across the cut `subsystem`.
inline Renyi2 operator_renyi2(const Mat& U, const Mat& O, const std::vector<int>& subsystem,
                              int n) {
  Mat heis = U * O * U.adjoint();
  double nrm = std::sqrt((heis.adjoint() * heis).trace().real() / double(dim_of(n)));
  StateVector chi = epr_state(n);
  std::vector<int> left;
  for (int q = 0; q < n; ++q) left.push_back(q);
  apply_gate_inplace(chi, heis / nrm, left);
  std::vector<int> both = subsystem;
  for (int q : subsystem) both.push_back(n + q);
  return renyi2_entropy(chi, both);
}

// ---------------------------------------------------------------------------
// Choi-distance proxy for the measurable error:
// || [(Phi_E - Phi_H) (x) Id](P_EPR) ||_1 at mixed index (p, q).
// ---------------------------------------------------------------------------

inline DiagnosticResult choi_distance_core(const Sampler& sample, int n, int p, int q,
                                           int samples, uint64_t seed) {
  const int64_t d = dim_of(n * (p + q));
  if (d > 16) throw std::invalid_argument("choi_distance: n(p+q) <= 4 required");
  StateVector epr = epr_state(n * (p + q));
  Mat pepr = epr.amps * epr.amps.adjoint();

  auto lift = [&](const Mat& U) {
    Mat W = Mat::Identity(1, 1);
    for (int i = 0; i < p; ++i) W = kron(W, U);
    for (int i = 0; i < q; ++i) W = kron(W, U.conjugate());
    return W;
  };

  Mat mean = Mat::Zero(d * d, d * d);
  for (int s = 0; s < samples; ++s) {
    Mat L = kron(lift(sample(s)), Mat::Identity(d, d));
    mean += L * pepr * L.adjoint();
  }
  mean /= double(samples);

  wg::WeingartenTable table = wg::weingarten_table(p + q, double(dim_of(n)));
  Mat exact = Mat::Zero(d * d, d * d);
  Mat E = Mat::Zero(d, d);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j) {
      E(i, j) = 1.0;
      Mat blk = wg::mixed_twirl_exact(E, p, q, n, &table) / double(d);
      E(i, j) = 0.0;
      for (int64_t r = 0; r < d; ++r)
        for (int64_t c = 0; c < d; ++c) exact(r * d + i, c * d + j) = blk(r, c);
    }
  DiagnosticResult r;
  r.name = "choi_distance";
  r.params = json{{"p", p}, {"q", q}};
  r.estimate = trace_distance(mean, exact);
  r.haar_ref = 0.0;
  r.n_samples = samples;
  r.seed = seed;
  return r;
}

inline DiagnosticResult choi_distance(const circuits::EnsembleSpec& spec, int p, int q,
                                      int samples, uint64_t seed) {
  auto r = choi_distance_core(ensemble_sampler(spec, Rng::derive(seed, 1000)), spec.n, p, q,
                              samples, seed);
  r.spec = spec.to_json();
  return r;
}

}  // namespace haarlab::diag
