#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "haarlab/rng.hpp"
#include "haarlab/serialize.hpp"

namespace haarlab::kwise {

// ---------------------------------------------------------------------------
// GF(2^m) arithmetic.  The reduction polynomial for each degree is the
// lexicographically smallest irreducible polynomial (these coincide with the
// usual published low-weight tables, e.g. x^8+x^4+x^3+x+1 for m=8); the
// choice is verified against a brute-force irreducibility test in the unit
// tests.
// ---------------------------------------------------------------------------

inline uint64_t poly_mul_raw(uint64_t a, uint64_t b) {
  uint64_t r = 0;
  while (b) {
    if (b & 1) r ^= a;
    a <<= 1;
    b >>= 1;
  }
  return r;
}

inline int poly_degree(uint64_t p) {
  int d = -1;
  while (p) {
    ++d;
    p >>= 1;
  }
  return d;
}

inline uint64_t poly_mod(uint64_t a, uint64_t mod) {
  int dm = poly_degree(mod);
  int da = poly_degree(a);
  while (da >= dm) {
    a ^= mod << (da - dm);
    da = poly_degree(a);
  }
  return a;
}

inline bool poly_irreducible(uint64_t p) {
  int d = poly_degree(p);
  if (d <= 0) return false;
  for (uint64_t q = 2; poly_degree(q) <= d / 2; ++q) {
    if (poly_mod(p, q) == 0) return false;
  }
  return true;
}

inline uint64_t smallest_irreducible(int m) {
  for (uint64_t p = (uint64_t(1) << m) + 1;; p += 1) {
    if (poly_degree(p) != m) throw std::logic_error("smallest_irreducible: search overran degree");
    if (poly_irreducible(p)) return p;
  }
}

struct GF2m {
  int m;
  uint64_t modulus;

  explicit GF2m(int m_) : m(m_), modulus(cached_modulus(m_)) {
    if (m < 1 || m > 16) throw std::invalid_argument("GF2m: m out of range [1,16]");
  }

  static uint64_t cached_modulus(int m) {
    static std::array<uint64_t, 17> table = [] {
      std::array<uint64_t, 17> t{};
      for (int i = 1; i <= 16; ++i) t[i] = smallest_irreducible(i);
      return t;
    }();
    if (m < 1 || m > 16) throw std::invalid_argument("GF2m: m out of range [1,16]");
    return table[m];
  }

  uint64_t mul(uint64_t a, uint64_t b) const { return poly_mod(poly_mul_raw(a, b), modulus); }
  uint64_t add(uint64_t a, uint64_t b) const { return a ^ b; }
};

// ---------------------------------------------------------------------------
// Function families
// ---------------------------------------------------------------------------

enum class Range { bits, ternary };
enum class Backend { table, poly };

struct FunctionFamily {
  int domain_bits = 0;
  Range range = Range::bits;
  int range_bits = 0;  // m_out; ignored for ternary
  Backend backend = Backend::table;
  int k = 1;  // poly backend: degree 2k-1

  void validate() const {
    if (domain_bits < 1 || domain_bits > 20)
      throw std::invalid_argument("FunctionFamily: domain_bits out of range");
    if (backend == Backend::poly) {
      if (range == Range::ternary)
        throw std::invalid_argument("FunctionFamily: poly backend does not support ternary range");
      if (k < 1) throw std::invalid_argument("FunctionFamily: k must be >= 1");
      if (range_bits < 1 || range_bits > domain_bits)
        throw std::invalid_argument("FunctionFamily: need 1 <= range_bits <= domain_bits");
      if (domain_bits > 16) throw std::invalid_argument("FunctionFamily: poly field too large");
    } else {
      if (range == Range::bits && (range_bits < 1 || range_bits > 62))
        throw std::invalid_argument("FunctionFamily: range_bits out of range");
    }
  }
};

// A sampled function.  Table backend stores 2^domain_bits entries; poly
// backend stores the 2k coefficients of a degree-(2k-1) polynomial over
// GF(2^domain_bits), evaluated by Horner and truncated to range_bits bits.
struct FunctionSample {
  FunctionFamily family;
  std::vector<uint64_t> payload;

  uint64_t evaluate(uint64_t x) const {
    if (x >> family.domain_bits)
      throw std::invalid_argument("FunctionSample: input wider than domain");
    if (family.backend == Backend::table) return payload[x];
    GF2m field(family.domain_bits);
    uint64_t acc = 0;
    for (auto it = payload.rbegin(); it != payload.rend(); ++it)
      acc = field.add(field.mul(acc, x), *it);
    return acc & ((uint64_t(1) << family.range_bits) - 1);
  }
};

inline FunctionSample sample_function(const FunctionFamily& family, Rng& rng) {
  family.validate();
  FunctionSample s;
  s.family = family;
  if (family.backend == Backend::table) {
    uint64_t size = uint64_t(1) << family.domain_bits;
    s.payload.resize(size);
    if (family.range == Range::ternary) {
      for (uint64_t i = 0; i < size; ++i) s.payload[i] = rng.uniform_below(3);
    } else {
      uint64_t mask = (uint64_t(1) << family.range_bits) - 1;
      for (uint64_t i = 0; i < size; ++i) s.payload[i] = rng.next_u64() & mask;
    }
  } else {
    uint64_t mask = (uint64_t(1) << family.domain_bits) - 1;
    s.payload.resize(2 * family.k);
    for (auto& c : s.payload) c = rng.next_u64() & mask;
  }
  return s;
}

inline FunctionSample zero_function(const FunctionFamily& family) {
  FunctionSample s;
  s.family = family;
  if (family.backend == Backend::table)
    s.payload.assign(uint64_t(1) << family.domain_bits, 0);
  else
    s.payload.assign(2 * family.k, 0);
  return s;
}

// Enumerates every member of a poly family (all coefficient tuples); used by
// the exhaustive independence oracle.  Size is (2^m)^(2k).
inline std::vector<FunctionSample> enumerate_poly_family(const FunctionFamily& family) {
  family.validate();
  if (family.backend != Backend::poly)
    throw std::invalid_argument("enumerate_poly_family: poly backend only");
  int ncoef = 2 * family.k;
  uint64_t field = uint64_t(1) << family.domain_bits;
  double total = std::pow(double(field), ncoef);
  if (total > 2e6) throw std::invalid_argument("enumerate_poly_family: family too large");
  std::vector<FunctionSample> out;
  out.reserve(size_t(total));
  std::vector<uint64_t> coef(ncoef, 0);
  while (true) {
    FunctionSample s;
    s.family = family;
    s.payload = coef;
    out.push_back(std::move(s));
    int i = 0;
    for (; i < ncoef; ++i) {
      if (++coef[i] < field) break;
      coef[i] = 0;
    }
    if (i == ncoef) break;
  }
  return out;
}

struct KwiseReport {
  bool exhaustive = false;
  bool exact_uniform = false;
  uint64_t tuples_checked = 0;
  double max_count_deviation = 0.0;  // exhaustive: max |count - expected|
  double chi_square = 0.0;           // statistical mode
  double dof = 0.0;
  double p_value = 1.0;
};

// Regularized upper incomplete gamma Q(a, x) for chi-square p-values.
inline double gamma_q(double a, double x) {
  if (x < 0 || a <= 0) return 1.0;
  if (x == 0) return 1.0;
  auto gser = [&](double a_, double x_) {
    double sum = 1.0 / a_, del = sum, ap = a_;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x_ / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x_ + a_ * std::log(x_) - std::lgamma(a_));
  };
  auto gcf = [&](double a_, double x_) {
    double b = x_ + 1.0 - a_, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
      double an = -double(i) * (double(i) - a_);
      b += 2.0;
      d = an * d + b;
      if (std::abs(d) < 1e-300) d = 1e-300;
      c = b + an / c;
      if (std::abs(c) < 1e-300) c = 1e-300;
      d = 1.0 / d;
      double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < 1e-14) break;
    }
    return std::exp(-x_ + a_ * std::log(x_) - std::lgamma(a_)) * h;
  };
  if (x < a + 1.0) return 1.0 - gser(a, x);
  return gcf(a, x);
}

// Exhaustive oracle over an explicit family member list: for every unordered
// set of 2k distinct points (evaluated in ascending order), the joint value
// tuple must appear exactly |family| / range^(2k) times.
inline KwiseReport verify_kwise_exhaustive(const std::vector<FunctionSample>& members, int k) {
  if (members.empty()) throw std::invalid_argument("verify_kwise_exhaustive: empty family");
  const FunctionFamily& fam = members.front().family;
  if (fam.domain_bits > 4)
    throw std::invalid_argument("verify_kwise_exhaustive: domain too large (need <= 4 bits)");
  const int points = 2 * k;
  const uint64_t domain = uint64_t(1) << fam.domain_bits;
  if (uint64_t(points) > domain)
    throw std::invalid_argument("verify_kwise_exhaustive: 2k exceeds domain size");
  uint64_t range = fam.range == Range::ternary ? 3 : (uint64_t(1) << fam.range_bits);

  double cells = std::pow(double(range), points);
  if (cells > 4e6) throw std::invalid_argument("verify_kwise_exhaustive: range too large");
  double expected = double(members.size()) / cells;

  KwiseReport rep;
  rep.exhaustive = true;
  rep.exact_uniform = true;

  std::vector<uint64_t> tuple(points);
  std::vector<uint64_t> counts(static_cast<size_t>(cells), 0);
  // Enumerate ascending tuples of distinct points.
  std::vector<int> idx(points);
  for (int i = 0; i < points; ++i) idx[i] = i;
  while (true) {
    for (int i = 0; i < points; ++i) tuple[i] = uint64_t(idx[i]);
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& f : members) {
      uint64_t cell = 0;
      for (int i = 0; i < points; ++i) cell = cell * range + f.evaluate(tuple[i]);
      ++counts[cell];
    }
    for (uint64_t c : counts) {
      double dev = std::abs(double(c) - expected);
      rep.max_count_deviation = std::max(rep.max_count_deviation, dev);
      if (dev > 1e-9) rep.exact_uniform = false;
    }
    ++rep.tuples_checked;
    // next combination
    int i = points - 1;
    while (i >= 0 && idx[i] == int(domain) - points + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < points; ++j) idx[j] = idx[j - 1] + 1;
  }
  return rep;
}

// Statistical mode: chi-square of joint values on random 2k-point tuples over
// sampled family members.
inline KwiseReport verify_kwise_statistical(const FunctionFamily& family, int k,
                                            uint64_t sample_budget, Rng& rng) {
  family.validate();
  const int points = 2 * k;
  const uint64_t domain = uint64_t(1) << family.domain_bits;
  uint64_t range = family.range == Range::ternary ? 3 : (uint64_t(1) << family.range_bits);
  double cells = std::pow(double(range), points);
  if (cells > 1e6) throw std::invalid_argument("verify_kwise_statistical: range too large");

  // One fixed tuple of distinct points, then fresh function samples.
  std::vector<uint64_t> tuple(points);
  for (int i = 0; i < points; ++i) {
    bool fresh;
    do {
      tuple[i] = rng.uniform_below(domain);
      fresh = true;
      for (int j = 0; j < i; ++j) fresh = fresh && tuple[j] != tuple[i];
    } while (!fresh);
  }
  std::vector<uint64_t> counts(size_t(cells), 0);
  for (uint64_t s = 0; s < sample_budget; ++s) {
    FunctionSample f = sample_function(family, rng);
    uint64_t cell = 0;
    for (int i = 0; i < points; ++i) cell = cell * range + f.evaluate(tuple[i]);
    ++counts[cell];
  }
  double expected = double(sample_budget) / cells;
  KwiseReport rep;
  rep.tuples_checked = 1;
  for (uint64_t c : counts) {
    double d = double(c) - expected;
    rep.chi_square += d * d / expected;
    rep.max_count_deviation = std::max(rep.max_count_deviation, std::abs(d));
  }
  rep.dof = cells - 1;
  rep.p_value = gamma_q(rep.dof / 2.0, rep.chi_square / 2.0);
  rep.exact_uniform = rep.p_value > 1e-6;
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization: {backend, domain_bits, range, payload(hex)}
// ---------------------------------------------------------------------------

inline json to_json(const FunctionSample& s) {
  std::vector<uint8_t> bytes;
  bytes.reserve(s.payload.size() * 8);
  for (uint64_t v : s.payload)
    for (int i = 0; i < 8; ++i) bytes.push_back(uint8_t(v >> (8 * i)));
  json j;
  j["backend"] = s.family.backend == Backend::table ? "table" : "poly";
  j["domain_bits"] = s.family.domain_bits;
  j["range"] = s.family.range == Range::ternary ? "ternary" : ("bits(" + std::to_string(s.family.range_bits) + ")");
  if (s.family.backend == Backend::poly) j["k"] = s.family.k;
  j["payload"] = to_hex(bytes);
  return j;
}

inline FunctionSample function_from_json(const json& j) {
  FunctionSample s;
  s.family.backend = j.at("backend") == "table" ? Backend::table : Backend::poly;
  s.family.domain_bits = j.at("domain_bits").get<int>();
  std::string range = j.at("range").get<std::string>();
  if (range == "ternary") {
    s.family.range = Range::ternary;
  } else {
    s.family.range = Range::bits;
    s.family.range_bits = std::stoi(range.substr(5, range.size() - 6));
  }
  if (j.contains("k")) s.family.k = j.at("k").get<int>();
  auto bytes = from_hex(j.at("payload").get<std::string>());
  if (bytes.size() % 8) throw std::invalid_argument("function_from_json: bad payload");
  s.payload.resize(bytes.size() / 8);
  for (size_t i = 0; i < s.payload.size(); ++i) {
    uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= uint64_t(bytes[8 * i + b]) << (8 * b);
    s.payload[i] = v;
  }
  return s;
}

}  // namespace haarlab::kwise
