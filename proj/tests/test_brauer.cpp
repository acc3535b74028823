#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "haarlab/brauer.hpp"

using namespace haarlab;
using namespace haarlab::brauer;

TEST_CASE("label enumeration counts (p+q)!") {
  CHECK(enumerate_ptps(1, 1).size() == 2);
  CHECK(enumerate_ptps(2, 1).size() == 6);
  CHECK(enumerate_ptps(2, 2).size() == 24);
  CHECK(enumerate_ptps(3, 1).size() == 24);
}

TEST_CASE("basic PTP matrices") {
  // identity label
  Mat id = ptp_matrix(PtpLabel::identity(2, 1), 3);
  CHECK((id - Mat::Identity(27, 27)).cwiseAbs().maxCoeff() == 0.0);

  // (1,1) single pair in/out = D * P_EPR
  PairingSet alpha({{0, 0}});
  Mat m = ptp_matrix(bare_label(alpha, 1, 1), 2);
  StateVector epr = epr_state(1);
  Mat pepr = epr.amps * epr.amps.adjoint();
  CHECK((m - 2.0 * pepr).cwiseAbs().maxCoeff() < 1e-12);

  // Gamma of a permutation operator matches ptp_of_perm at D = 2
  for (auto& pi : wg::all_permutations(3)) {
    Mat sp = wg::permutation_operator(pi, 3, 1);
    Mat gamma = partial_transpose(sp, {2}, 3);  // last register (q=1, n=1)
    Mat viaptp = ptp_matrix(ptp_of_perm(pi, 2, 1), 2);
    CHECK((gamma - viaptp).cwiseAbs().maxCoeff() == 0.0);
  }
  for (auto& pi : wg::all_permutations(4)) {
    Mat sp = wg::permutation_operator(pi, 4, 1);
    Mat gamma = partial_transpose(sp, {2, 3}, 4);  // last two registers (q=2)
    Mat viaptp = ptp_matrix(ptp_of_perm(pi, 2, 2), 2);
    CHECK((gamma - viaptp).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("PTPs commute with mixed tensor unitaries") {
  Rng rng(41);
  for (const auto& l : enumerate_ptps(2, 1)) {
    Mat m = ptp_matrix(l, 2);
    Mat u = haar_unitary(2, rng);
    Mat mtu = kron(kron(u, u), u.conjugate());
    CHECK((mtu * m - m * mtu).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("diagram composition matches matrix multiplication") {
  // exhaustive at (2,1), D=3 and (1,1), D=2
  for (auto [p, q, D] : std::vector<std::tuple<int, int, int>>{{1, 1, 2}, {2, 1, 3}}) {
    auto labels = enumerate_ptps(p, q);
    std::vector<Mat> mats;
    for (const auto& l : labels) mats.push_back(ptp_matrix(l, D));
    for (size_t i = 0; i < labels.size(); ++i)
      for (size_t j = 0; j < labels.size(); ++j) {
        Composition c = compose(labels[i], labels[j]);
        Mat expect = std::pow(double(D), c.loops) * ptp_matrix(c.label, D);
        CHECK((mats[i] * mats[j] - expect).cwiseAbs().maxCoeff() < 1e-10);
      }
  }
}

TEST_CASE("diagrammatic trace and inner product") {
  for (auto [p, q, D] : std::vector<std::tuple<int, int, int>>{{1, 1, 3}, {2, 1, 3}, {2, 2, 5}}) {
    auto labels = enumerate_ptps(p, q);
    for (const auto& a : labels) {
      Mat ma = ptp_matrix(a, D);
      CHECK(std::abs(std::pow(double(D), trace_loop_count(a)) - ma.trace().real()) < 1e-9);
      for (const auto& b : labels) {
        Mat mb = ptp_matrix(b, D);
        double direct = (ma.adjoint() * mb).trace().real();
        CHECK(std::abs(ptp_inner(a, b, double(D)) - direct) < 1e-9);
      }
    }
  }
}

TEST_CASE("bare projectors") {
  // alpha = empty -> identity
  CHECK((bare_projector(PairingSet{}, 3, 2, 1) - Mat::Identity(27, 27)).cwiseAbs().maxCoeff() ==
        0.0);

  // idempotence and rank D^{p+q-2|alpha|}
  for (auto [p, q, D] : std::vector<std::tuple<int, int, int>>{{1, 1, 2}, {2, 1, 3}, {2, 2, 4}}) {
    for (int ell = 0; ell <= std::min(p, q); ++ell)
      for (const auto& alpha : enumerate_pairings(p, q, ell)) {
        Mat pa = bare_projector(alpha, D, p, q);
        CHECK((pa * pa - pa).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(rank_of(pa) == ipow(D, p + q - 2 * ell));
      }
  }

  // (1,1) single pair at D=2: rank-1 projector onto |EPR>
  Mat p11 = bare_projector(PairingSet({{0, 0}}), 2, 1, 1);
  CHECK(rank_of(p11) == 1);

  // nesting: P_alpha P_beta = P_alpha when alpha contains beta
  PairingSet big({{0, 0}, {1, 1}}), small({{0, 0}});
  Mat pb = bare_projector(big, 4, 2, 2), ps = bare_projector(small, 4, 2, 2);
  CHECK((pb * ps - pb).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((ps * pb - pb).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("no-EPR projector") {
  // (1,0): identity
  CHECK((no_epr_projector(1, 0, 3) - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

  // (1,1), D=2: I - P_EPR with rank 3
  Mat pine = no_epr_projector(1, 1, 2);
  StateVector epr = epr_state(1);
  Mat pepr = epr.amps * epr.amps.adjoint();
  CHECK((pine - (Mat::Identity(4, 4) - pepr)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(rank_of(pine) == 3);

  // dual construction agreement at (2,1), D in {4,5} and (1,1)/(2,2)
  for (auto [p, q, D] : std::vector<std::tuple<int, int, int>>{
           {1, 1, 3}, {2, 1, 4}, {2, 1, 5}, {2, 2, 5}}) {
    Mat a = no_epr_projector(p, q, D, NoEprMethod::nullspace);
    Mat b = no_epr_projector(p, q, D, NoEprMethod::weingarten);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a * a - a).cwiseAbs().maxCoeff() < 1e-9);
  }

  // trace identity: tr(Pi^nE (pi_L (+) pi_R)^{-1}) = [Wg|_perm^{-1}]_{1, pi}
  {
    const int p = 2, q = 1, D = 5;
    Mat pine21 = no_epr_projector(p, q, D, NoEprMethod::nullspace);
    auto t = wg::weingarten_table(p + q, double(D));
    auto blocks = wg::block_permutations(p, q);
    const int f = int(blocks.size());
    RMat sub(f, f);
    for (int i = 0; i < f; ++i)
      for (int j = 0; j < f; ++j)
        sub(i, j) = t.wg(t.index_of(blocks[i]), t.index_of(blocks[j]));
    RMat inv = sub.inverse();
    int id_row = 0;
    for (int i = 0; i < f; ++i)
      if (blocks[i] == wg::Permutation::identity(p + q)) id_row = i;
    for (int i = 0; i < f; ++i) {
      // the PTP of a block permutation is an honest permutation operator
      Mat op = ptp_matrix(ptp_of_perm(blocks[i].inverse(), p, q), D);
      double lhs = (pine21 * op).trace().real();
      CHECK(std::abs(lhs - inv(id_row, i)) < 1e-8);
    }
  }
}

TEST_CASE("orthogonal projectors") {
  for (auto [p, q, D] : std::vector<std::tuple<int, int, int>>{{1, 1, 2}, {2, 1, 4}, {2, 2, 5}}) {
    auto proj = orthogonal_projectors(p, q, D);
    const int64_t N = ipow(D, p + q);

    // P~_empty = Pi^nE
    CHECK((proj.p_tilde[0] - no_epr_projector(p, q, D)).cwiseAbs().maxCoeff() < 1e-8);

    // mutual orthogonality, idempotence, completeness
    Mat sum = Mat::Zero(N, N);
    for (size_t i = 0; i < proj.p_tilde.size(); ++i) {
      CHECK((proj.p_tilde[i] * proj.p_tilde[i] - proj.p_tilde[i]).cwiseAbs().maxCoeff() < 1e-7);
      for (size_t j = 0; j < i; ++j)
        CHECK((proj.p_tilde[i] * proj.p_tilde[j]).cwiseAbs().maxCoeff() < 1e-7);
      sum += proj.p_tilde[i];
    }
    CHECK((sum - Mat::Identity(N, N)).cwiseAbs().maxCoeff() < 1e-8);

    // ranks: D^{p+q-2|alpha|} - N_EPR^{(p-|alpha|, q-|alpha|)}
    for (size_t i = 0; i < proj.pairings.size(); ++i) {
      int ell = proj.pairings[i].size();
      int64_t expect = ipow(D, p + q - 2 * ell) - n_epr(p - ell, q - ell, D);
      CHECK(rank_of(proj.p_tilde[i]) == expect);
      CHECK(rank_of(proj.p_ne[i]) == expect);
    }

    // P^nE orthogonality across sizes
    for (size_t i = 0; i < proj.pairings.size(); ++i)
      for (size_t j = 0; j < proj.pairings.size(); ++j) {
        if (proj.pairings[i].size() == proj.pairings[j].size()) continue;
        CHECK((proj.p_ne[i] * proj.p_ne[j]).cwiseAbs().maxCoeff() < 1e-8);
      }

    // P~_l independent of the within-size ordering
    auto rev = orthogonal_projectors(p, q, D, PairingOrder::reverse_lex);
    for (size_t l = 0; l < proj.p_ell.size(); ++l)
      CHECK((proj.p_ell[l] - rev.p_ell[l]).cwiseAbs().maxCoeff() < 1e-7);

    // N_EPR consistency: rank(span of nontrivial bare projectors) =
    // D^{p+q} - rank(Pi^nE)
    CHECK(n_epr(p, q, D) == N - rank_of(no_epr_projector(p, q, D)));
  }
}

TEST_CASE("P~_l commutes with every PTP") {
  for (auto [p, q, D] : std::vector<std::tuple<int, int, int>>{{1, 1, 2}, {2, 1, 3}, {2, 2, 4}}) {
    auto proj = orthogonal_projectors(p, q, D);
    for (const auto& label : enumerate_ptps(p, q)) {
      Mat sigma = ptp_matrix(label, D);
      for (const auto& pl : proj.p_ell)
        CHECK(spectral_norm(pl * sigma - sigma * pl) < 1e-8);
    }
  }
}

TEST_CASE("sector isometries") {
  Rng rng(47);
  for (auto [p, q, D] : std::vector<std::tuple<int, int, int>>{{1, 1, 2}, {1, 1, 4}, {2, 1, 4}, {2, 2, 5}}) {
    auto sd = sector_isometries(p, q, D);
    const int64_t N = ipow(D, p + q);

    // |A_l| = C(p,l) C(q,l) l!
    for (const auto& iso : sd.isometries) {
      double expect = 1.0;
      for (int i = 0; i < iso.ell; ++i)
        expect *= double(p - i) * double(q - i) / double(i + 1);
      for (int i = 2; i <= iso.ell; ++i) expect *= i;
      CHECK(double(iso.a_dim) == expect);
    }

    // I~_l^dag I~_l = P~_l and completeness
    Mat complete = Mat::Zero(N, N);
    for (const auto& iso : sd.isometries) {
      Mat ptl = iso.matrix.adjoint() * iso.matrix;
      CHECK((ptl - sd.proj.p_ell[iso.ell]).cwiseAbs().maxCoeff() < 1e-8);
      complete += ptl;
    }
    CHECK((complete - Mat::Identity(N, N)).cwiseAbs().maxCoeff() < 1e-8);

    // per-pairing isometries map onto the small no-EPR subspace
    for (size_t ai = 0; ai < sd.proj.pairings.size(); ++ai) {
      int ell = sd.proj.pairings[ai].size();
      Mat range = sd.iso_alpha[ai] * sd.iso_alpha[ai].adjoint();
      Mat pine = no_epr_projector(p - ell, q - ell, D);
      CHECK((range - pine).cwiseAbs().maxCoeff() < 1e-7);
    }

    // l = 0 isometry acts as Pi^nE itself
    CHECK((sd.isometries[0].matrix - no_epr_projector(p, q, D)).cwiseAbs().maxCoeff() < 1e-7);
  }

  // unitary equivariance at (1,1) and (2,1), D = 4 (n = 2 qubits)
  for (auto [p, q] : std::vector<std::pair<int, int>>{{1, 1}, {2, 1}}) {
    auto sd = sector_isometries(p, q, 4);
    for (int trial = 0; trial < 10; ++trial) {
      Mat u = haar_unitary(4, rng);
      Mat lift = Mat::Identity(1, 1);
      for (int i = 0; i < p; ++i) lift = kron(lift, u);
      for (int i = 0; i < q; ++i) lift = kron(lift, u.conjugate());
      for (const auto& iso : sd.isometries) {
        int pl = p - iso.ell, ql = q - iso.ell;
        Mat small = Mat::Identity(1, 1);
        for (int i = 0; i < pl; ++i) small = kron(small, u);
        for (int i = 0; i < ql; ++i) small = kron(small, u.conjugate());
        Mat small_with_a = kron(Mat::Identity(iso.a_dim, iso.a_dim), small);
        CHECK((iso.matrix * lift - small_with_a * iso.matrix).cwiseAbs().maxCoeff() < 1e-7);
      }
    }
  }
}

TEST_CASE("approximate orthogonality bounds") {
  // exact entries at small sizes first: G entries vanish at (1,1) (only one
  // pairing per size)
  RMat g11 = approx_orthogonality_G(1, 1, 4, 1);
  CHECK(g11.rows() == 1);
  CHECK(g11(0, 0) == 0.0);

  // matrix-free application agrees with dense P^nE at (2,2), D=3
  {
    const int p = 2, q = 2, D = 3;
    auto alphas = enumerate_pairings(p, q, 1);
    Rng rng(53);
    for (const auto& alpha : alphas) {
      Mat dense = nearly_orthogonal_projector(alpha, D, p, q);
      std::vector<cplx> v(ipow(D, 4));
      for (auto& x : v) x = cplx(rng.gaussian(), rng.gaussian());
      Vec vv = Eigen::Map<Vec>(v.data(), v.size());
      Vec expect = dense * vv;
      apply_pne_alpha(v, alpha, D, p, q);
      Vec got = Eigen::Map<Vec>(v.data(), v.size());
      CHECK((got - expect).norm() < 1e-9);
    }
  }

  // theorem bound at (2,2), D = 16
  {
    const int p = 2, q = 2, D = 16;
    for (int ell = 1; ell <= 2; ++ell) {
      RMat g = approx_orthogonality_G(p, q, D, ell);
      double bound = std::exp(double(ell * (p + q)) / D) - 1.0;
      CHECK(spectral_norm(g.cast<cplx>()) <= bound + 1e-9);
    }
    RMat f = approx_orthogonality_F(p, q, D, 1, 1);
    double fbound = std::exp(2.0 * (p + q) / D) - 1.0;
    CHECK(spectral_norm(f.cast<cplx>()) <= fbound + 1e-9);
  }
}
