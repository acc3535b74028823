#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "haarlab/pathrecord.hpp"

using namespace haarlab;
using namespace haarlab::pr;

namespace {
cplx inner(const RelationState& a, const RelationState& b) {
  cplx acc = 0.0;
  for (const auto& [k, amp] : b.amps) {
    auto it = a.amps.find(k);
    if (it != a.amps.end()) acc += std::conj(it->second) * amp;
  }
  return acc;
}

RelationState random_reachable_state(int n, int depth, uint64_t seed) {
  // random superposition built by interleaving Haar W's with V-type queries
  AdversaryProgram p;
  p.n = n;
  p.m = 0;
  Rng r(seed);
  std::vector<QueryType> all{QueryType::fwd, QueryType::inv, QueryType::conj, QueryType::transp};
  for (int i = 0; i < depth; ++i) p.queries.push_back(all[r.uniform_below(4)]);
  p = AdversaryProgram::random(n, 0, p.queries, seed);
  return run_path_recording(p);
}
}  // namespace

TEST_CASE("V forced action on a basis input") {
  const int n = 2, N = 4;
  RelationState psi;
  psi.n = n;
  psi.m = 0;
  BasisKey k;
  k.sys = 3;
  psi.amps[k] = 1.0;
  RelationState out = apply_V(psi);
  // (1/sqrt N) sum_y |y>|{(3,y)}>|empty>
  CHECK(out.amps.size() == N);
  for (const auto& [key, amp] : out.amps) {
    CHECK(key.L.size() == 1);
    CHECK(key.R.size() == 0);
    CHECK(key.L.pairs[0].first == 3);
    CHECK(key.L.pairs[0].second == key.sys);
    CHECK(std::abs(amp - 0.5) < 1e-12);
  }
  CHECK(std::abs(out.norm() - 1.0) < 1e-12);

  // Vbar records into R instead
  RelationState outbar = apply_Vbar(psi);
  for (const auto& [key, amp] : outbar.amps) {
    CHECK(key.R.size() == 1);
    CHECK(key.L.size() == 0);
  }
}

TEST_CASE("t=1 reduced state is I/N for all four query types") {
  for (auto qt : {QueryType::fwd, QueryType::inv, QueryType::conj, QueryType::transp}) {
    auto prog = AdversaryProgram::random(3, 1, {qt}, 1234 + int(qt));
    Mat rho = reduced_density(run_path_recording(prog));
    Mat sys = partial_trace(rho, {0, 1, 2}, 4);
    CHECK((sys - Mat::Identity(8, 8) / 8.0).cwiseAbs().maxCoeff() < 1e-10);

    // exact Haar agrees at t=1
    Mat rho_h = exact_haar_reduced(prog);
    CHECK(trace_distance(rho, rho_h) < 1e-9);
  }
}

TEST_CASE("partial isometry and adjointness on reachable states") {
  for (int trial = 0; trial < 10; ++trial) {
    RelationState psi = random_reachable_state(2, 1 + trial % 3, 100 + trial);
    double norm_in = psi.norm();
    RelationState vpsi = apply_V(psi);
    CHECK(std::abs(vpsi.norm() - norm_in) < 1e-9);
    RelationState vbpsi = apply_Vbar(psi);
    CHECK(std::abs(vbpsi.norm() - norm_in) < 1e-9);
  }
  // adjointness <phi|V psi> = <V^dag phi|psi> on sparse random states
  for (int trial = 0; trial < 10; ++trial) {
    RelationState psi = random_reachable_state(2, 2, 300 + trial);
    RelationState phi = random_reachable_state(2, 3, 400 + trial);
    cplx a = inner(phi, apply_V(psi));
    cplx b = std::conj(inner(psi, apply_V_dag(phi)));
    CHECK(std::abs(a - b) < 1e-9);
    cplx c = inner(phi, apply_Vbar(psi));
    cplx d = std::conj(inner(psi, apply_Vbar_dag(phi)));
    CHECK(std::abs(c - d) < 1e-9);
  }
}

TEST_CASE("queries advance the length sector by exactly one") {
  RelationState psi = RelationState::initial(2, 0);
  for (int i = 0; i < 3; ++i) {
    for (const auto& [k, a] : psi.amps) CHECK(k.L.size() + k.R.size() <= i);
    psi = (i % 2 == 0) ? apply_V(psi) : apply_Vbar_dag(psi);
    for (const auto& [k, a] : psi.amps) CHECK(k.L.size() + k.R.size() <= i + 1);
  }
}

TEST_CASE("conjugation symmetry: Vbar = swap_LR ∘ V ∘ swap_LR") {
  for (int trial = 0; trial < 8; ++trial) {
    RelationState psi = random_reachable_state(2, 2, 500 + trial);
    RelationState lhs = apply_Vbar(psi);
    RelationState rhs = swap_LR(apply_V(swap_LR(psi)));
    RelationState diff = detail::lin_sub(lhs, rhs);
    CHECK(diff.norm() < 1e-10);
    RelationState lhs2 = apply_Vbar_dag(psi);
    RelationState rhs2 = swap_LR(apply_V_dag(swap_LR(psi)));
    CHECK(detail::lin_sub(lhs2, rhs2).norm() < 1e-10);
  }
}

TEST_CASE("exact Haar wire-sum matches Monte Carlo on mixed query patterns") {
  const int S = 20000;
  std::vector<std::vector<QueryType>> patterns{
      {QueryType::fwd, QueryType::fwd},
      {QueryType::fwd, QueryType::inv},
      {QueryType::conj, QueryType::fwd},
      {QueryType::inv, QueryType::transp},
      {QueryType::transp, QueryType::conj},
  };
  int idx = 0;
  for (const auto& pat : patterns) {
    auto prog = AdversaryProgram::random(2, 0, pat, 900 + idx++);
    Mat exact = exact_haar_reduced(prog);
    Mat mc = haar_mc_reduced(prog, S, 31 + idx);
    CHECK(hermiticity_defect(exact) < 1e-10);
    CHECK(std::abs(exact.trace().real() - 1.0) < 1e-10);
    CHECK((mc - exact).cwiseAbs().maxCoeff() < 0.025);  // ~3 sigma at 2e4 samples
  }
  // with an ancilla register
  auto prog_anc =
      AdversaryProgram::random(2, 1, {QueryType::fwd, QueryType::inv}, 77);
  Mat exact = exact_haar_reduced(prog_anc);
  Mat mc = haar_mc_reduced(prog_anc, S, 78);
  CHECK((mc - exact).cwiseAbs().maxCoeff() < 0.025);
}

TEST_CASE("t=2 forward-forward closed forms match the general engines") {
  for (int n : {2, 3, 4}) {
    auto prog = AdversaryProgram::random(n, 0, {QueryType::fwd, QueryType::fwd}, 1000 + n);
    Mat pr_sparse = reduced_density(run_path_recording(prog));
    Mat pr_closed = path_recording_ff2_closed(prog);
    CHECK((pr_sparse - pr_closed).cwiseAbs().maxCoeff() < 1e-10);

    Mat eh_generic = exact_haar_reduced(prog);
    Mat eh_closed = exact_haar_ff2_closed(prog);
    CHECK((eh_generic - eh_closed).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("t=2 path recording vs exact Haar trace distance decreases with n") {
  double prev = 1.0;
  for (int n : {4, 6}) {
    auto prog = AdversaryProgram::random(n, 0, {QueryType::fwd, QueryType::fwd},
                                         Rng::derive(2026, n));
    OracleSpec a;
    a.kind = OracleSpec::Kind::path_recording;
    OracleSpec b;
    b.kind = OracleSpec::Kind::exact_haar;
    double td = trace_distance(run_adversary(prog, a), run_adversary(prog, b));
    CHECK(td < prev);
    CHECK(td < 0.05);
    prev = td;
  }
}

TEST_CASE("path recording with interference: fwd then inv returns the input") {
  // V^dag V = identity on the initial sector, so a fwd+inv pair undoes itself
  const int n = 3;
  AdversaryProgram p;
  p.n = n;
  p.m = 0;
  p.queries = {QueryType::fwd, QueryType::inv};
  Rng rng(55);
  Mat w1 = haar_unitary(8, rng);
  p.unitaries = {w1, Mat::Identity(8, 8), Mat::Identity(8, 8)};
  Mat rho = reduced_density(run_path_recording(p));
  Vec expect = w1.col(0);
  Mat pure = expect * expect.adjoint();
  CHECK(trace_distance(rho, pure) < 1e-9);
}

TEST_CASE("adversary program JSON round-trip") {
  auto prog = AdversaryProgram::random(2, 1, {QueryType::fwd, QueryType::conj}, 11);
  BlobStore store;
  json j = program_to_json(prog, store);
  AdversaryProgram back = program_from_json(j, store);
  CHECK(back.n == 2);
  CHECK(back.m == 1);
  CHECK(back.queries == prog.queries);
  for (size_t i = 0; i < prog.unitaries.size(); ++i)
    CHECK((back.unitaries[i] - prog.unitaries[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ensemble oracle runs") {
  circuits::EnsembleSpec spec;
  spec.variant = circuits::EnsembleSpec::Variant::haar;
  spec.n = 2;
  auto prog = AdversaryProgram::random(2, 0, {QueryType::fwd}, 5);
  OracleSpec o;
  o.kind = OracleSpec::Kind::ensemble;
  o.ensemble = spec;
  o.samples = 2000;
  o.seed = 6;
  Mat rho = run_adversary(prog, o);
  Mat exact = exact_haar_reduced(prog);
  CHECK((rho - exact).cwiseAbs().maxCoeff() < 0.08);
}
