#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "probcal/rng.hpp"

using namespace probcal;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and addressed by path") {
  RandomStream a(42, {1, 2}), b(42, {1, 2}), c(42, {1, 3}), d(43, {1, 2});
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 64; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
    vd.push_back(d.next_u64());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("split does not advance the parent") {
  RandomStream a(5, {0});
  RandomStream b(5, {0});
  auto child = a.split(9);
  (void)child.next_u32();
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.split(1).next_u64() != a.split(2).next_u64());
}

TEST_CASE("uniform draws stay inside (0,1) with the right moments") {
  RandomStream s(11, {});
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("uniform_index covers the range evenly") {
  RandomStream s(3, {7});
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) counts[s.uniform_index(7)]++;
  for (int c : counts) CHECK(std::abs(c - n / 7) < 400);
}
