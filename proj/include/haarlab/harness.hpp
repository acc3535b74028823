#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include "haarlab/brauer.hpp"
#include "haarlab/diagnostics.hpp"
#include "haarlab/kwise.hpp"
#include "haarlab/pathrecord.hpp"

namespace haarlab::harness {

inline const char* version() { return "haarlab 0.1.0"; }

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string experiment;
  json ensemble;  // EnsembleSpec fields; may be empty for non-ensemble experiments
  json params = json::object();
  int samples = 100;
  uint64_t seed = 0;
  bool has_seed = false;
  std::string out_dir = "out";

  static ExperimentConfig from_json(const json& j) {
    static const std::set<std::string> allowed{"experiment", "ensemble", "params",
                                               "samples",    "seed",     "out"};
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!allowed.count(it.key())) throw ConfigError("unknown config key: " + it.key());
    ExperimentConfig c;
    if (!j.contains("experiment")) throw ConfigError("config missing 'experiment'");
    c.experiment = j.at("experiment").get<std::string>();
    if (j.contains("ensemble")) c.ensemble = j.at("ensemble");
    if (j.contains("params")) c.params = j.at("params");
    if (j.contains("samples")) c.samples = j.at("samples").get<int>();
    if (j.contains("seed")) {
      c.seed = j.at("seed").get<uint64_t>();
      c.has_seed = true;
    }
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
    return c;
  }

  json to_json() const {
    json j{{"experiment", experiment}, {"params", params}, {"samples", samples}};
    if (!ensemble.is_null() && !ensemble.empty()) j["ensemble"] = ensemble;
    j["seed"] = seed;
    return j;
  }

  std::string hash() const { return hash_hex(canonical_dump(to_json())); }
};

struct CatalogEntry {
  std::string name;
  std::string required;
  std::string limits;
};

inline std::vector<CatalogEntry> list_experiments() {
  return {
      {"inverse_echo", "ensemble, samples, seed", "n <= 10"},
      {"conjugate_epr", "ensemble, samples, seed", "n <= 8"},
      {"z0_memory", "ensemble, samples, seed", "n <= 10"},
      {"size_distribution_tvd", "ensemble, samples, seed", "n <= 7"},
      {"op_spreading_tvd", "ensemble, samples, seed; params.max_paulis optional", "n <= 5"},
      {"correlator_survey", "ensemble, samples, seed; params.locality, params.k", "n <= 8"},
      {"otoc_point", "ensemble, samples, seed; params.paulis, params.ordering", "n <= 8"},
      {"hp_decoder", "ensemble, samples, seed; params.input_size, params.radiation",
       "2n + 2a <= 20"},
      {"renyi2_profile", "ensemble, samples, seed; params.cut", "n <= 10"},
      {"choi_distance", "ensemble, samples, seed; params.p, params.q", "n(p+q) <= 4"},
      {"path_recording_t2", "seed; params.n_values", "n <= 8, m = 0"},
      {"weingarten_table", "params.k, params.D", "k <= 6"},
      {"kwise_verify", "params.domain_bits, params.k", "domain_bits <= 4"},
      {"error_bounds", "params.kind + per-kind arguments", "none"},
      {"brauer_fixture", "params.p, params.q, params.D", "(p,q) <= (2,2), D <= 5"},
  };
}

inline circuits::EnsembleSpec ensemble_of(const ExperimentConfig& c) {
  if (c.ensemble.is_null() || c.ensemble.empty())
    throw ConfigError("experiment '" + c.experiment + "' requires an ensemble");
  try {
    return circuits::EnsembleSpec::from_json(c.ensemble);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad ensemble spec: ") + e.what());
  }
}

// Runs the experiment and returns {result json, optional csv text}.
inline std::pair<json, std::string> run_experiment(const ExperimentConfig& c) {
  if (!c.has_seed) throw ConfigError("config requires a seed (use --seed or the seed key)");
  const std::string& e = c.experiment;
  std::string csv;
  diag::DiagnosticResult r;
  if (e == "inverse_echo") {
    r = diag::inverse_echo(ensemble_of(c), c.samples, c.seed);
  } else if (e == "conjugate_epr") {
    r = diag::conjugate_epr_test(ensemble_of(c), c.samples, c.seed);
  } else if (e == "z0_memory") {
    r = diag::z0_memory(ensemble_of(c), c.samples, c.seed);
  } else if (e == "size_distribution_tvd") {
    r = diag::size_distribution_tvd(ensemble_of(c), c.samples, c.seed);
    csv = "weight,mean_probability,std_error\n";
    auto mean = r.extras.at("mean_distribution");
    auto se = r.extras.at("bin_std_errors");
    for (size_t w = 0; w < mean.size(); ++w)
      csv += std::to_string(w) + "," + mean[w].dump() + "," + se[w].dump() + "\n";
  } else if (e == "op_spreading_tvd") {
    int max_paulis = c.params.value("max_paulis", 0);
    r = diag::op_spreading_tvd(ensemble_of(c), c.samples, c.seed, max_paulis);
  } else if (e == "correlator_survey") {
    r = diag::correlator_survey(ensemble_of(c), c.params.value("locality", 2),
                                c.params.value("k", 2), c.samples, c.seed,
                                c.params.value("tuples", 64),
                                c.params.value("tail_threshold", 0.2));
  } else if (e == "otoc_point") {
    auto spec = ensemble_of(c);
    std::vector<PauliString> ps;
    for (const auto& s : c.params.at("paulis")) {
      std::string letters = s.get<std::string>();
      if (int(letters.size()) != spec.n) throw ConfigError("otoc_point: pauli width mismatch");
      PauliString p(spec.n);
      for (int q = 0; q < spec.n; ++q) {
        auto idx = std::string("IXYZ").find(letters[q]);
        if (idx == std::string::npos) throw ConfigError("otoc_point: bad pauli letter");
        p.letters[q] = uint8_t(idx);
      }
      ps.push_back(p);
    }
    auto ordering = c.params.value("ordering", std::string("oto")) == "to"
                        ? diag::CorrelatorOrdering::time_ordered
                        : diag::CorrelatorOrdering::out_of_time_ordered;
    StateVector psi = StateVector::zero(spec.n);
    std::vector<double> re(c.samples), im(c.samples);
    diag::parallel_samples(c.samples, [&](int s) {
      cplx v = diag::otoc(diag::sample_dense(spec, c.seed, s), ps, psi, ordering);
      re[s] = v.real();
      im[s] = v.imag();
    });
    auto mre = diag::mean_and_stderr(re), mim = diag::mean_and_stderr(im);
    r.name = "otoc_point";
    r.spec = spec.to_json();
    r.params = c.params;
    r.estimate = mre.mean;
    r.std_error = mre.std_error;
    r.extras = json{{"imag_mean", mim.mean}, {"imag_se", mim.std_error}};
    r.n_samples = c.samples;
    r.seed = c.seed;
  } else if (e == "hp_decoder") {
    r = diag::hp_decoder_fidelity(ensemble_of(c), c.params.value("input_size", 1),
                                  c.params.value("radiation", 0), c.samples, c.seed);
  } else if (e == "renyi2_profile") {
    auto spec = ensemble_of(c);
    int cut = c.params.value("cut", spec.n / 2);
    std::vector<int> sub;
    for (int q = 0; q < cut; ++q) sub.push_back(q);
    std::vector<double> vals(c.samples);
    diag::parallel_samples(c.samples, [&](int s) {
      Mat U = diag::sample_dense(spec, c.seed, s);
      StateVector st;
      st.num_qubits = spec.n;
      st.amps = U.col(0);
      vals[s] = diag::renyi2_entropy(st, sub).direct;
    });
    auto ms = diag::mean_and_stderr(vals);
    r.name = "renyi2_profile";
    r.spec = spec.to_json();
    r.params = json{{"cut", cut}};
    r.estimate = ms.mean;
    r.std_error = ms.std_error;
    r.n_samples = c.samples;
    r.seed = c.seed;
  } else if (e == "choi_distance") {
    r = diag::choi_distance(ensemble_of(c), c.params.value("p", 1), c.params.value("q", 1),
                            c.samples, c.seed);
  } else if (e == "path_recording_t2") {
    std::vector<int> ns = c.params.value("n_values", std::vector<int>{4, 6});
    json curve = json::array();
    for (int n : ns) {
      auto prog = pr::AdversaryProgram::random(
          n, 0, {pr::QueryType::fwd, pr::QueryType::fwd}, Rng::derive(c.seed, n));
      pr::OracleSpec a;
      a.kind = pr::OracleSpec::Kind::path_recording;
      pr::OracleSpec b;
      b.kind = pr::OracleSpec::Kind::exact_haar;
      double td = trace_distance(pr::run_adversary(prog, a), pr::run_adversary(prog, b));
      curve.push_back(json{{"n", n}, {"trace_distance", td}});
    }
    r.name = "path_recording_t2";
    r.params = json{{"n_values", ns}};
    r.extras = json{{"curve", curve}};
    r.estimate = curve.back().at("trace_distance").get<double>();
    r.n_samples = 1;
    r.seed = c.seed;
  } else if (e == "weingarten_table") {
    auto t = wg::weingarten_table(c.params.value("k", 2), c.params.value("D", 4.0));
    r.name = "weingarten_table";
    r.params = c.params;
    r.extras = t.to_json();
    r.n_samples = 0;
    r.seed = c.seed;
  } else if (e == "kwise_verify") {
    kwise::FunctionFamily fam;
    fam.domain_bits = c.params.value("domain_bits", 3);
    fam.range = kwise::Range::bits;
    fam.range_bits = c.params.value("range_bits", fam.domain_bits);
    fam.backend = kwise::Backend::poly;
    fam.k = c.params.value("k", 1);
    auto rep = kwise::verify_kwise_exhaustive(kwise::enumerate_poly_family(fam), fam.k);
    r.name = "kwise_verify";
    r.params = c.params;
    r.estimate = rep.exact_uniform ? 1.0 : 0.0;
    r.extras = json{{"tuples_checked", rep.tuples_checked},
                    {"max_count_deviation", rep.max_count_deviation}};
    r.n_samples = 0;
    r.seed = c.seed;
  } else if (e == "error_bounds") {
    std::string kind = c.params.value("kind", "lrfc");
    wg::BudgetBreakdown b;
    if (kind == "lrfc")
      b = wg::lrfc_error_budget(c.params.value("t", 2.0), c.params.value("N", 256.0),
                                c.params.value("eps2", 0.0));
    else if (kind == "gluing")
      b = wg::gluing_error_budget(c.params.value("t", 2.0), c.params.value("N_abc", 4096.0),
                                  c.params.value("N_ab", 256.0), c.params.value("N_bc", 256.0),
                                  c.params.value("N_min", 16.0), c.params.value("eps2", 0.0));
    else if (kind == "two_layer")
      b = wg::two_layer_error_budget(c.params.value("n", 8.0), c.params.value("k", 2.0),
                                     c.params.value("xi", 2.0),
                                     c.params.value("eps_block", 0.0),
                                     c.params.value("eps2", 0.0));
    else if (kind == "translation") {
      auto tb = wg::error_translation_bounds(c.params.value("n", 4), c.params.value("p", 1),
                                             c.params.value("q", 1),
                                             c.params.value("eps_additive", 0.0));
      b.terms = {tb.eps_r_bound, tb.eps_m_upper, tb.valid_regime ? 1.0 : 0.0};
      b.total = tb.eps_r_bound;
    } else {
      throw ConfigError("error_bounds: unknown kind " + kind);
    }
    r.name = "error_bounds";
    r.params = c.params;
    r.estimate = b.total;
    r.extras = json{{"terms", b.terms}};
    r.n_samples = 0;
    r.seed = c.seed;
  } else if (e == "brauer_fixture") {
    int p = c.params.value("p", 1), q = c.params.value("q", 1), D = c.params.value("D", 2);
    auto sd = brauer::sector_isometries(p, q, D);
    json ranks = json::array(), adims = json::array();
    Mat completeness = Mat::Zero(brauer::ipow(D, p + q), brauer::ipow(D, p + q));
    for (const auto& iso : sd.isometries) {
      completeness += iso.matrix.adjoint() * iso.matrix;
      adims.push_back(iso.a_dim);
    }
    for (size_t i = 0; i < sd.proj.pairings.size(); ++i)
      ranks.push_back(brauer::rank_of(sd.proj.p_tilde[i]));
    double defect =
        (completeness - Mat::Identity(completeness.rows(), completeness.cols()))
            .cwiseAbs()
            .maxCoeff();
    r.name = "brauer_fixture";
    r.params = c.params;
    r.estimate = defect;
    r.extras = json{{"ptilde_ranks", ranks}, {"a_dims", adims}};
    r.n_samples = 0;
    r.seed = c.seed;
  } else {
    throw ConfigError("unknown experiment: " + e);
  }
  return {r.to_json(), csv};
}

struct RunManifest {
  std::string config_hash;
  std::string tool_version;
  double wall_clock_ms = 0.0;
  std::vector<std::string> result_files;

  json to_json() const {
    return json{{"config_hash", config_hash},
                {"tool_version", tool_version},
                {"wall_clock_ms", wall_clock_ms},
                {"results", result_files}};
  }
};

// Executes the experiment and writes out/<hash>/{manifest.json, <name>.json,
// <name>.csv?}.  Result files depend only on (config, seed); the manifest
// additionally records wall-clock time.
inline RunManifest run(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  auto start = std::chrono::steady_clock::now();
  auto [result, csv] = run_experiment(c);
  RunManifest m;
  m.config_hash = c.hash();
  m.tool_version = version();
  fs::path dir = fs::path(c.out_dir) / m.config_hash;
  fs::create_directories(dir);
  {
    std::ofstream f(dir / (c.experiment + ".json"), std::ios::binary);
    f << result.dump(2) << "\n";
  }
  m.result_files.push_back(c.experiment + ".json");
  if (!csv.empty()) {
    std::ofstream f(dir / (c.experiment + ".csv"), std::ios::binary);
    f << csv;
    m.result_files.push_back(c.experiment + ".csv");
  }
  m.wall_clock_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  {
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    f << m.to_json().dump(2) << "\n";
  }
  return m;
}

// Quick exact-identity suite; returns false on any tolerance failure.
inline bool selftest(std::string* log = nullptr) {
  std::string out;
  bool ok = true;
  auto check = [&](bool cond, const std::string& what) {
    out += std::string(cond ? "[ok]   " : "[FAIL] ") + what + "\n";
    ok = ok && cond;
  };
  // Weingarten k=2, D=4
  auto t = wg::weingarten_table(2, 4.0);
  check(std::abs(t.wg(0, 0) - 1.0 / 15.0) < 1e-12, "weingarten k=2 D=4 diagonal 1/15");
  check(std::abs(t.wg(0, 1) + 1.0 / 60.0) < 1e-12, "weingarten k=2 D=4 off-diagonal -1/60");
  // twirl idempotence at n=1, k=2
  Rng rng(7);
  Mat x = random_hermitian(4, rng);
  Mat tw = wg::haar_twirl_exact(x, 2, 1);
  check((wg::haar_twirl_exact(tw, 2, 1) - tw).cwiseAbs().maxCoeff() < 1e-9,
        "haar twirl idempotent");
  // path recording t=1 gives I/N
  auto prog = pr::AdversaryProgram::random(2, 1, {pr::QueryType::fwd}, 99);
  Mat rho = pr::reduced_density(pr::run_path_recording(prog));
  Mat sys = partial_trace(rho, {0, 1}, 3);
  check((sys - 0.25 * Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9,
        "path recording t=1 reduced = I/N");
  // Brauer completeness at (1,1), D=2
  auto sd = brauer::sector_isometries(1, 1, 2);
  Mat complete = Mat::Zero(4, 4);
  for (const auto& iso : sd.isometries) complete += iso.matrix.adjoint() * iso.matrix;
  check((complete - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8,
        "sector isometry completeness (1,1) D=2");
  if (log) *log = out;
  return ok;
}

}  // namespace haarlab::harness
