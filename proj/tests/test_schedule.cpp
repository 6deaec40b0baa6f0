#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "ihb/schedule.hpp"

using namespace ihb;
using namespace ihb::schedule;

TEST_CASE("permutation_at is a bijection on every small power-of-two pool") {
  Rng rng(5);
  for (unsigned width = 1; width <= 16; ++width) {
    const uint64_t size = uint64_t{1} << width;
    for (int trial = 0; trial < (width <= 8 ? 100 : 3); ++trial) {
      const uint64_t key = rng.next_u64();
      std::vector<bool> seen(size, false);
      for (uint64_t i = 0; i < size; ++i) {
        const uint64_t v = permutation_at(key, size, i);
        REQUIRE(v < size);
        REQUIRE(!seen[v]);
        seen[v] = true;
      }
    }
  }
}

TEST_CASE("permutation full cycle at 2^20 (bitmap sweep oracle)") {
  const uint64_t size = uint64_t{1} << 20;
  std::vector<bool> seen(size, false);
  for (uint64_t i = 0; i < size; ++i) {
    const uint64_t v = permutation_at(0xfeedface, size, i);
    REQUIRE(v < size);
    REQUIRE(!seen[v]);
    seen[v] = true;
  }
}

TEST_CASE("distinct keys give distinct sequences") {
  int differing = 0;
  for (uint64_t i = 0; i < 256; ++i) {
    if (permutation_at(1, 256, i) != permutation_at(2, 256, i)) differing++;
  }
  CHECK(differing >= 1);  // overwhelmingly ~255
}

TEST_CASE("permutation_at rejects bad arguments") {
  CHECK_THROWS_AS(permutation_at(0, 100, 0), std::invalid_argument);
  CHECK_THROWS_AS(permutation_at(0, 256, 256), std::out_of_range);
}

TEST_CASE("local /24 permutation visits all 256 addresses exactly once") {
  Schedule sched;
  sched.pool = PoolSpec::local_subnet(*parse_prefix("192.168.0.0/24"));
  sched.order = OrderSpec::permutation(42);
  Rng rng(0);
  std::set<Ipv4> seen;
  for (int i = 0; i < 256; ++i) {
    const Ipv4 dst = next_destination(sched, rng);
    CHECK(slash24_of(dst) == *parse_prefix("192.168.0.0/24"));
    seen.insert(dst);
  }
  CHECK(seen.size() == 256);
  CHECK(sched.order.epoch == 1);  // wrapped exactly once
  CHECK(sched.order.cursor == 0);
}

TEST_CASE("per24 destinations follow the stateless accessor") {
  Schedule sched;
  sched.pool = PoolSpec::per24();
  sched.order = OrderSpec::permutation(7);
  Rng rng(1);
  for (uint64_t i = 0; i < 4096; ++i) {
    const Ipv4 dst = next_destination(sched, rng);
    CHECK(slash24_index(dst) == permutation_at(7, uint64_t{1} << 24, i));
  }
}

TEST_CASE("pure random full-v4 sequences reproduce under a fixed seed") {
  Schedule a{PoolSpec::full_v4(), OrderSpec::pure_random(123)};
  Schedule b{PoolSpec::full_v4(), OrderSpec::pure_random(123)};
  Rng rng_a(55), rng_b(55);
  for (int i = 0; i < 1000; ++i) {
    CHECK(next_destination(a, rng_a) == next_destination(b, rng_b));
  }
}

TEST_CASE("permutation repeats identically across epochs by default") {
  Schedule sched;
  sched.pool = PoolSpec::local_subnet(*parse_prefix("10.1.0.0/28"));
  sched.order = OrderSpec::permutation(9);
  Rng rng(2);
  std::vector<Ipv4> first_epoch, second_epoch;
  for (int i = 0; i < 16; ++i) first_epoch.push_back(next_destination(sched, rng));
  for (int i = 0; i < 16; ++i) second_epoch.push_back(next_destination(sched, rng));
  CHECK(first_epoch == second_epoch);

  SUBCASE("re-keying per epoch changes the walk") {
    Schedule rekeyed;
    rekeyed.pool = sched.pool;
    rekeyed.order = OrderSpec::permutation(9, /*repeat=*/false);
    std::vector<Ipv4> e1, e2;
    for (int i = 0; i < 16; ++i) e1.push_back(next_destination(rekeyed, rng));
    for (int i = 0; i < 16; ++i) e2.push_back(next_destination(rekeyed, rng));
    CHECK(e1 != e2);
    std::set<Ipv4> unique2(e2.begin(), e2.end());
    CHECK(unique2.size() == 16);  // still a full cycle
  }
}

TEST_CASE("lhb_ttl formula and clamping") {
  CHECK(lhb_ttl(*parse_ipv4("192.168.0.1"), *parse_ipv4("192.168.0.2")) == 2);
  CHECK(lhb_ttl(*parse_ipv4("10.0.0.1"), *parse_ipv4("11.0.0.1")) == 16);
  // exactly 16 shared bits -> 16, at the clamp boundary without clamping
  CHECK(lhb_ttl(*parse_ipv4("10.1.0.1"), *parse_ipv4("10.1.255.1")) == 16);
  CHECK_THROWS_AS(lhb_ttl(42, 42), std::invalid_argument);
}

TEST_CASE("lhb_ttl is symmetric and non-increasing in shared prefix length") {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const Ipv4 a = rng.next_u32();
    const Ipv4 b = rng.next_u32();
    if (a == b) continue;
    CHECK(lhb_ttl(a, b) == lhb_ttl(b, a));
  }
  // Walk src/dst pairs of strictly increasing shared prefix.
  uint8_t prev = 255;
  for (unsigned shared = 0; shared <= 31; ++shared) {
    const Ipv4 src = 0xaaaaaaaa;
    const Ipv4 dst = src ^ (0x80000000u >> shared);  // flip bit -> `shared` common bits
    const uint8_t ttl = lhb_ttl(src, dst);
    CHECK(ttl <= prev);
    prev = ttl;
  }
}

TEST_CASE("hit probability matches the closed form and the per24 oracle") {
  CHECK(hit_probability(PoolSpec::full_v4(), 8) == doctest::Approx(1.0 / 256));
  CHECK(hit_probability(PoolSpec::full_v4(), 32) == std::exp2(-32));
  CHECK(hit_probability(PoolSpec::per24(), 8) == doctest::Approx(1.0 / 256));

  // Oracle: enumerate /24 indices inside one /8; a per24 send hits the /8
  // lens iff its index lands in that set.
  uint64_t inside = 0;
  for (uint64_t idx = 0; idx < (uint64_t{1} << 24); ++idx) {
    if ((idx >> 16) == 10) inside++;
  }
  const double oracle =
      static_cast<double>(inside) / static_cast<double>(uint64_t{1} << 24);
  CHECK(hit_probability(PoolSpec::per24(), 8) == doctest::Approx(oracle));

  CHECK_THROWS_AS(hit_probability(PoolSpec::per24(), 25),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      hit_probability(PoolSpec::local_subnet(*parse_prefix("10.0.0.0/24")), 8),
      std::invalid_argument);

  // Identical for both pools wherever both are defined.
  for (unsigned m = 0; m <= 24; ++m) {
    CHECK(hit_probability(PoolSpec::full_v4(), m) ==
          hit_probability(PoolSpec::per24(), m));
  }
}

TEST_CASE("coverage arithmetic") {
  CHECK(coverage_estimate(uint64_t{1} << 24, 32, OrderKind::Permutation) ==
        524288.0);
  CHECK(coverage_estimate(uint64_t{1} << 24, 1, OrderKind::Permutation) ==
        16777216.0);
  CHECK(schedule::u128_to_string(all_pairs_total(uint64_t{1} << 32)) ==
        "18446744073709551616");  // 2^64
  CHECK(schedule::u128_to_string(all_pairs_total(uint64_t{1} << 24)) ==
        "281474976710656");  // 2^48
  CHECK_THROWS_AS(coverage_estimate(16, 0, OrderKind::Random),
                  std::invalid_argument);
}

TEST_CASE("random-order coverage matches a coupon-collector simulation") {
  // pool 16, one sender: expectation 16 * H(16) ~= 54.09
  const double expected = coverage_estimate(16, 1, OrderKind::Random);
  CHECK(expected == doctest::Approx(16.0 * harmonic(16)));

  Rng rng(2024);
  const int trials = 100000;
  uint64_t total_draws = 0;
  for (int t = 0; t < trials; ++t) {
    uint16_t seen_mask = 0;
    int draws = 0;
    while (seen_mask != 0xffff) {
      seen_mask |= static_cast<uint16_t>(1u << rng.next_below(16));
      draws++;
    }
    total_draws += static_cast<uint64_t>(draws);
  }
  const double simulated =
      static_cast<double>(total_draws) / static_cast<double>(trials);
  CHECK(simulated == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("pure random draws on full v4 are uniform over a /8 lens") {
  Schedule sched{PoolSpec::full_v4(), OrderSpec::pure_random(17)};
  Rng rng(17);
  const int n = 1000000;
  std::vector<int> octet_counts(256, 0);
  for (int i = 0; i < n; ++i) {
    octet_counts[next_destination(sched, rng) >> 24]++;
  }
  const double expected = n / 256.0;
  double chi2 = 0;
  for (int c : octet_counts) {
    const double d = c - expected;
    chi2 += d * d / expected;
  }
  // chi-square critical value for 255 dof at alpha = 0.001 is ~330.5
  CHECK(chi2 < 330.52);
}
