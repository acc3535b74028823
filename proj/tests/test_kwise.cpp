#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "haarlab/kwise.hpp"

using namespace haarlab;
using namespace haarlab::kwise;

TEST_CASE("field moduli match the published low-weight table") {
  // Smallest irreducible polynomials of each degree.
  CHECK(GF2m::cached_modulus(1) == 0b11);
  CHECK(GF2m::cached_modulus(2) == 0b111);
  CHECK(GF2m::cached_modulus(3) == 0b1011);
  CHECK(GF2m::cached_modulus(4) == 0b10011);
  CHECK(GF2m::cached_modulus(8) == 0x11B);  // x^8+x^4+x^3+x+1 (the AES field)
  for (int m = 1; m <= 12; ++m) {
    uint64_t mod = GF2m::cached_modulus(m);
    CHECK(poly_degree(mod) == m);
    CHECK(poly_irreducible(mod));
  }
}

TEST_CASE("field arithmetic basics") {
  GF2m f(3);
  // x * x^2 = x^3 = x + 1 mod x^3+x+1
  CHECK(f.mul(0b010, 0b100) == 0b011);
  CHECK(f.mul(1, 5) == 5);
  CHECK(f.add(5, 5) == 0);
  // multiplication is invertible for nonzero elements
  for (uint64_t a = 1; a < 8; ++a) {
    std::vector<bool> hit(8, false);
    for (uint64_t b = 0; b < 8; ++b) hit[f.mul(a, b)] = true;
    for (uint64_t v = 0; v < 8; ++v) CHECK(hit[v]);
  }
}

TEST_CASE("polynomial evaluation") {
  FunctionFamily fam;
  fam.domain_bits = 3;
  fam.range = Range::bits;
  fam.range_bits = 3;
  fam.backend = Backend::poly;
  fam.k = 1;

  // identity polynomial f(x) = x
  FunctionSample id = zero_function(fam);
  id.payload = {0, 1};
  for (uint64_t x = 0; x < 8; ++x) CHECK(id.evaluate(x) == x);

  // constant polynomial
  FunctionSample cst = zero_function(fam);
  cst.payload = {5, 0};
  for (uint64_t x = 0; x < 8; ++x) CHECK(cst.evaluate(x) == 5);

  CHECK_THROWS(id.evaluate(8));
}

TEST_CASE("table backend sampling and determinism") {
  FunctionFamily tern;
  tern.domain_bits = 2;
  tern.range = Range::ternary;
  tern.backend = Backend::table;
  Rng rng(5);
  FunctionSample f = sample_function(tern, rng);
  CHECK(f.payload.size() == 4);
  for (uint64_t v : f.payload) CHECK(v < 3);
  for (uint64_t x = 0; x < 4; ++x) CHECK(f.evaluate(x) == f.payload[x]);

  // repeated evaluation agrees bit-exactly
  FunctionFamily bits;
  bits.domain_bits = 10;
  bits.range = Range::bits;
  bits.range_bits = 7;
  bits.backend = Backend::table;
  Rng r2(9);
  FunctionSample g = sample_function(bits, r2);
  Rng r3(77);
  for (int i = 0; i < 1000; ++i) {
    uint64_t x = r3.uniform_below(1024);
    CHECK(g.evaluate(x) == g.evaluate(x));
    CHECK(g.evaluate(x) < 128);
  }

  // poly backend rejects ternary range
  FunctionFamily bad;
  bad.domain_bits = 3;
  bad.range = Range::ternary;
  bad.backend = Backend::poly;
  Rng r4(1);
  CHECK_THROWS(sample_function(bad, r4));
}

TEST_CASE("exhaustive 2k-wise independence of the poly backend") {
  // k = 1 over GF(8): every pair of distinct points jointly uniform.
  FunctionFamily fam;
  fam.domain_bits = 3;
  fam.range = Range::bits;
  fam.range_bits = 3;
  fam.backend = Backend::poly;
  fam.k = 1;
  auto fams = enumerate_poly_family(fam);
  CHECK(fams.size() == 64);
  auto rep = verify_kwise_exhaustive(fams, 1);
  CHECK(rep.exhaustive);
  CHECK(rep.exact_uniform);
  CHECK(rep.tuples_checked == 28);  // C(8,2)

  // truncation closure: first 2 bits of the field value
  fam.range_bits = 2;
  auto fams2 = enumerate_poly_family(fam);
  auto rep2 = verify_kwise_exhaustive(fams2, 1);
  CHECK(rep2.exact_uniform);

  // k = 2 (degree-3 polynomials): 4-point tuples jointly uniform.
  FunctionFamily fam4;
  fam4.domain_bits = 3;
  fam4.range = Range::bits;
  fam4.range_bits = 3;
  fam4.backend = Backend::poly;
  fam4.k = 2;
  auto fams4 = enumerate_poly_family(fam4);
  CHECK(fams4.size() == 4096);
  auto rep4 = verify_kwise_exhaustive(fams4, 2);
  CHECK(rep4.exact_uniform);
  CHECK(rep4.tuples_checked == 70);  // C(8,4)

  // degenerate family of a single fixed function fails uniformity
  std::vector<FunctionSample> single{fams.front()};
  auto bad = verify_kwise_exhaustive(single, 1);
  CHECK(!bad.exact_uniform);
}

TEST_CASE("statistical mode on the table backend") {
  FunctionFamily tern;
  tern.domain_bits = 3;
  tern.range = Range::ternary;
  tern.backend = Backend::table;
  Rng rng(123);
  auto rep = verify_kwise_statistical(tern, 1, 100000, rng);
  CHECK(rep.p_value > 1e-6);
  CHECK(rep.dof == 8);
  CHECK(rep.exact_uniform);
}

TEST_CASE("function serialization round-trip") {
  FunctionFamily fam;
  fam.domain_bits = 4;
  fam.range = Range::bits;
  fam.range_bits = 4;
  fam.backend = Backend::poly;
  fam.k = 2;
  Rng rng(44);
  FunctionSample f = sample_function(fam, rng);
  json j = to_json(f);
  CHECK(j.at("backend") == "poly");
  FunctionSample g = function_from_json(j);
  for (uint64_t x = 0; x < 16; ++x) CHECK(f.evaluate(x) == g.evaluate(x));

  FunctionFamily tern;
  tern.domain_bits = 2;
  tern.range = Range::ternary;
  tern.backend = Backend::table;
  FunctionSample h = sample_function(tern, rng);
  FunctionSample h2 = function_from_json(to_json(h));
  for (uint64_t x = 0; x < 4; ++x) CHECK(h.evaluate(x) == h2.evaluate(x));
}
