#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "loceq/rng.hpp"

using namespace loceq;

TEST_SUITE("rng") {

// Known-answer vectors published with the Random123 reference code.
TEST_CASE("philox known answers") {
  using P = Philox4x32;
  CHECK(P::apply({0, 0, 0, 0}, {0, 0}) ==
        P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(P::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                 {0xffffffffu, 0xffffffffu}) ==
        P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(P::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                 {0xa4093822u, 0x299f31d0u}) ==
        P::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("same seed and stream reproduce") {
  Rng a(42, Stream::kGraph), b(42, Stream::kGraph);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("streams and substreams are distinct") {
  Rng a(42, Stream::kGraph), b(42, Stream::kWeights), c(42, Stream::kGraph, 1);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const auto x = a(), y = b(), z = c();
    same_ab += x == y;
    same_ac += x == z;
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
}

TEST_CASE("uniform and below stay in range") {
  Rng r(7, Stream::kOracle);
  std::vector<int> counts(10);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const auto k = r.below(10);
    REQUIRE(k < 10);
    ++counts[k];
  }
  // Each bin: mean 1e4, sd ~95.
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  CHECK(r.below(1) == 0);
}

TEST_CASE("normal moments") {
  Rng r(11, Stream::kOracle);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal(1.0, 0.5);
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::sqrt(var) == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("derive_seed spreads indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(1, i));
  CHECK(seen.size() == 10000);
  CHECK(derive_seed(1, 5) != derive_seed(2, 5));
  CHECK(derive_seed(3, 9) == derive_seed(3, 9));
}

}
