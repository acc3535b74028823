#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "haarlab/diagnostics.hpp"
#include "haarlab/pathrecord.hpp"

using namespace haarlab;
using namespace haarlab::diag;

namespace {
circuits::EnsembleSpec haar_spec(int n) {
  circuits::EnsembleSpec s;
  s.variant = circuits::EnsembleSpec::Variant::haar;
  s.n = n;
  return s;
}
}  // namespace

TEST_CASE("otoc trivial cases") {
  const int n = 3;
  StateVector psi = StateVector::zero(n);
  Mat id = Mat::Identity(8, 8);

  // 4-point OTOC with all P = Z0, U = I: Z0^4 = I
  PauliString z0(n);
  z0.letters[0] = 3;
  std::vector<PauliString> z4(4, z0);
  CHECK(std::abs(otoc(id, z4, psi, CorrelatorOrdering::out_of_time_ordered) - 1.0) < 1e-12);
  CHECK(std::abs(otoc(id, z4, psi, CorrelatorOrdering::time_ordered) - 1.0) < 1e-12);

  // commuting Z-paulis at U = I: product of expectations (each +/-1 on |0^n>)
  PauliString z1(n);
  z1.letters[1] = 3;
  std::vector<PauliString> mix{z0, z1, z0, z1};
  CHECK(std::abs(otoc(id, mix, psi, CorrelatorOrdering::time_ordered) - 1.0) < 1e-12);

  // X Paulis at U = I kill the overlap
  PauliString x0(n);
  x0.letters[0] = 1;
  std::vector<PauliString> xs{x0, z0, x0, z0};
  CHECK(std::abs(otoc(id, xs, psi, CorrelatorOrdering::time_ordered)) < 1e-12);
}

TEST_CASE("otoc ensemble mean |C|^2 matches the exact Haar wire-sum at n=2") {
  // E|C|^2 for C = <0| P U^dag Q U P U^dag Q U |0> equals the (0,0) element
  // of the exact-Haar adversary output with W's = the Paulis.
  const int n = 2;
  PauliString p(n), q(n);
  p.letters[0] = 3;  // Z0
  q.letters[1] = 1;  // X1
  Mat pm = pauli_matrix(p), qm = pauli_matrix(q);
  pr::AdversaryProgram prog;
  prog.n = n;
  prog.m = 0;
  prog.queries = {pr::QueryType::fwd, pr::QueryType::inv, pr::QueryType::fwd, pr::QueryType::inv};
  prog.unitaries = {Mat::Identity(4, 4), qm, pm, qm, pm};
  Mat rho = pr::exact_haar_reduced(prog);
  double exact = rho(0, 0).real();

  const int S = 20000;
  Rng rng(404);
  std::vector<double> vals(S);
  StateVector psi = StateVector::zero(n);
  for (int s = 0; s < S; ++s) {
    Mat u = haar_unitary(4, rng);
    vals[s] = std::norm(otoc(u, {q, p, q, p}, psi, CorrelatorOrdering::out_of_time_ordered));
  }
  auto ms = mean_and_stderr(vals);
  CHECK(std::abs(ms.mean - exact) <= 4.0 * ms.std_error + 1e-4);
}

TEST_CASE("correlator survey") {
  // identity: Z-only tuples give |C| = 1
  auto fixed_id = fixed_sampler(Mat::Identity(64, 64));
  auto rid = correlator_survey_core(fixed_id, 6, 2, 2, 2, 2025, 64, 0.2);
  CHECK(rid.estimate <= 1.0 + 1e-12);
  CHECK(rid.estimate > 0.9);  // some Z-heavy tuple saturates

  // Haar at n = 6: all correlators exponentially small
  auto rh = correlator_survey(haar_spec(6), 2, 2, 10, 77, 32);
  CHECK(rh.estimate < 0.6);
  CHECK(rh.extras.at("tail_fraction").get<double>() < 0.05);

  // LRFC at n = 6 statistically indistinguishable from Haar on the max scale
  circuits::EnsembleSpec lrfc;
  lrfc.variant = circuits::EnsembleSpec::Variant::lrfc;
  lrfc.n = 6;
  auto rl = correlator_survey(lrfc, 2, 2, 10, 78, 32);
  CHECK(rl.estimate < 0.6);
}

TEST_CASE("operator size distribution") {
  const int n = 4;
  PauliString z0(n);
  z0.letters[0] = 3;
  auto point = operator_size_distribution(Mat::Identity(16, 16), z0);
  CHECK(std::abs(point[1] - 1.0) < 1e-12);
  for (int w = 0; w <= n; ++w)
    if (w != 1) CHECK(std::abs(point[w]) < 1e-12);

  // Haar closed form is normalized
  auto haar = haar_size_distribution(n);
  double sum = 0.0;
  for (double v : haar) sum += v;
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK(std::abs(haar[1] - 3.0 * n / (std::pow(4.0, n) - 1.0)) < 1e-14);

  // per-sample distributions are normalized for unitary U and Pauli O
  Rng rng(31);
  auto d = operator_size_distribution(haar_unitary(16, rng), z0);
  double s2 = 0.0;
  for (double v : d) s2 += v;
  CHECK(std::abs(s2 - 1.0) < 1e-9);

  // Haar-MC mean distribution is close to the closed form
  auto r = size_distribution_tvd(haar_spec(4), 200, 5);
  CHECK(r.estimate <= 3.0 * r.std_error + 0.02);
}

TEST_CASE("op spreading TVD") {
  // deterministic identity ensemble concentrates: TVD = 1 - 1/(4^n - 1)
  const int n = 2;
  auto rid = op_spreading_tvd_core(fixed_sampler(Mat::Identity(4, 4)), n, 10, 3);
  CHECK(std::abs(rid.estimate - (1.0 - 1.0 / 15.0)) < 1e-9);

  // Haar self-consistency: TVD shrinks with samples
  auto r1 = op_spreading_tvd_core(ensemble_sampler(haar_spec(2), 7), 2, 50, 7);
  auto r2 = op_spreading_tvd_core(ensemble_sampler(haar_spec(2), 7), 2, 800, 7);
  CHECK(r2.estimate < r1.estimate);
  CHECK(r2.estimate < 0.2);
}

TEST_CASE("inverse echo") {
  // U = I: Z0 perturbation leaves |0^n> fixed, echo value 0
  auto rid = inverse_echo_core(fixed_sampler(Mat::Identity(256, 256)), 8, 3, 1);
  CHECK(rid.estimate == 0.0);

  // Haar at n = 8: mean >= 1/2 within MC error
  auto rh = inverse_echo(haar_spec(8), 60, 99);
  CHECK(rh.estimate >= 0.5 - 3.0 * rh.std_error);

  // shallow brickwork: bounded by light cone size L/n with L <= 2d
  circuits::EnsembleSpec bw;
  bw.variant = circuits::EnsembleSpec::Variant::brickwork1d;
  bw.n = 8;
  bw.depth = 1;
  auto rb = inverse_echo(bw, 40, 100);
  CHECK(rb.estimate <= 2.0 * 1.0 / 8.0 + 1e-9);
  CHECK(rb.extras.at("light_cone_size").get<int>() <= 2);
}

TEST_CASE("conjugate EPR test") {
  auto rid = conjugate_epr_core(fixed_sampler(Mat::Identity(64, 64)), 6, 2, 1);
  CHECK(std::abs(rid.estimate - 1.0) < 1e-9);

  circuits::EnsembleSpec bw;
  bw.variant = circuits::EnsembleSpec::Variant::brickwork1d;
  bw.n = 6;
  bw.depth = 1;
  auto rb = conjugate_epr_test(bw, 10, 4);
  CHECK(std::abs(rb.estimate - 1.0) < 1e-9);  // far pair outside the light cone

  auto rh = conjugate_epr_test(haar_spec(6), 150, 5);
  CHECK(std::abs(rh.estimate - 0.25) <= 3.0 * rh.std_error);
}

TEST_CASE("z0 memory") {
  auto rid = z0_memory_core(fixed_sampler(Mat::Identity(16, 16)), 4, 2, 1);
  CHECK(std::abs(rid.estimate - 1.0) < 1e-12);

  auto rh = z0_memory(haar_spec(4), 400, 6);
  CHECK(std::abs(rh.estimate - 1.0 / 255.0) <= 3.0 * rh.std_error + 1e-4);

  // brickwork r=2 lower bound at depth d: >= (1/15)^d - 3 sigma
  for (int d : {1, 2}) {
    circuits::EnsembleSpec bw;
    bw.variant = circuits::EnsembleSpec::Variant::brickwork1d;
    bw.n = 4;
    bw.depth = d;
    auto rb = z0_memory(bw, 300, 7 + d);
    CHECK(rb.estimate >= std::pow(1.0 / 15.0, d) - 3.0 * rb.std_error);
  }
}

TEST_CASE("Hayden-Preskill decoder") {
  // U = I with radiation covering the input: perfect teleportation
  auto rid = hp_decoder_core(fixed_sampler(Mat::Identity(16, 16)), 4, 1, 1, 2, 1);
  CHECK(std::abs(rid.estimate - 1.0) < 1e-9);
  CHECK(std::abs(rid.extras.at("postselection_probability").get<double>() - 0.25) < 1e-9);

  // no radiation: decoded pair is maximally mixed, Uhlmann fidelity 1/2^a
  auto r0 = hp_decoder_core(fixed_sampler(Mat::Identity(16, 16)), 4, 1, 0, 2, 1);
  CHECK(std::abs(r0.estimate - 0.5) < 1e-9);

  // Haar with all-qubit radiation decodes well
  auto rh = hp_decoder_fidelity(haar_spec(4), 1, 4, 60, 11);
  CHECK(rh.estimate > 0.9);
}

TEST_CASE("Renyi-2 entropies") {
  // product state: zero entropy in both routes
  StateVector prod = StateVector::zero(4);
  auto rp = renyi2_entropy(prod, {0, 1});
  CHECK(std::abs(rp.direct) < 1e-12);
  CHECK(std::abs(rp.epr_form) < 1e-12);

  // EPR across the cut: |A| ln 2
  StateVector epr = epr_state(2);  // 4 qubits, pairs (0,2), (1,3)
  auto re = renyi2_entropy(epr, {0, 1});
  CHECK(std::abs(re.direct - 2.0 * std::log(2.0)) < 1e-10);
  CHECK(std::abs(re.epr_form - re.direct) < 1e-9);

  // the two routes agree on random states
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    StateVector s;
    s.num_qubits = 5;
    s.amps = random_state(32, rng);
    auto r = renyi2_entropy(s, {0, 2, 4});
    CHECK(std::abs(r.direct - r.epr_form) < 1e-9);
  }

  // operator entanglement of the identity is zero
  auto ri = operator_renyi2(Mat::Identity(16, 16), Mat::Identity(16, 16), {0, 1}, 4);
  CHECK(std::abs(ri.direct) < 1e-10);
}

TEST_CASE("choi distance proxy") {
  // Haar ensemble converges toward zero
  auto r1 = choi_distance(haar_spec(2), 1, 1, 100, 21);
  auto r2 = choi_distance(haar_spec(2), 1, 1, 800, 21);
  CHECK(r2.estimate < r1.estimate);
  // identity ensemble is far from the Haar twirl
  auto rid = choi_distance_core(fixed_sampler(Mat::Identity(4, 4)), 2, 1, 1, 4, 1);
  CHECK(rid.estimate > 0.5);
}

TEST_CASE("MC diagnostics converge to references at two sample sizes") {
  for (int S : {100, 900}) {
    auto r = z0_memory(haar_spec(3), S, 1000 + S);
    CHECK(std::abs(r.estimate - r.haar_ref) <= 3.0 * r.std_error + 2e-3);
    auto c = conjugate_epr_test(haar_spec(4), S, 2000 + S);
    CHECK(std::abs(c.estimate - c.haar_ref) <= 3.0 * c.std_error + 2e-3);
  }
}

TEST_CASE("size distribution TVD bound against the 4-design proxy") {
  // At n = 1 the strong-design proxy at (p,q) = (2,2) bounds the size TVD by
  // 3 n^2 eps + MC error.  The diagonal ternary-phase ensemble is a bad
  // design; Haar is exact.
  const int n = 1;
  auto bad_sampler = [&](int i) {
    Rng r(Rng::derive(911, i));
    Mat u = Mat::Zero(2, 2);
    u(0, 0) = std::exp(cplx(0, 2 * 3.14159265358979 * r.uniform()));
    u(1, 1) = std::exp(cplx(0, 2 * 3.14159265358979 * r.uniform()));
    return u;
  };
  // eps proxy: Choi distance at (2,2)
  auto eps_bad = choi_distance_core(bad_sampler, n, 2, 2, 300, 3).estimate;
  auto tvd_bad = size_distribution_tvd_core(bad_sampler, n, 300, 4);
  CHECK(tvd_bad.estimate <= 3.0 * n * n * eps_bad + 3.0 * tvd_bad.std_error + 0.02);

  auto haar_sampler = ensemble_sampler(haar_spec(1), 5);
  auto eps_haar = choi_distance_core(haar_sampler, n, 2, 2, 300, 5).estimate;
  auto tvd_haar = size_distribution_tvd_core(haar_sampler, n, 300, 6);
  CHECK(tvd_haar.estimate <= 3.0 * n * n * eps_haar + 3.0 * tvd_haar.std_error + 0.02);
}
