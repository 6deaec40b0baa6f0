#pragma once

#include <cstdint>
#include <string>

#include "ihb/ip.hpp"
#include "ihb/rng.hpp"
#include "ihb/wire.hpp"

namespace ihb::schedule {

using wire::OrderKind;
using wire::PoolKind;

// Destination pool. FullV4 walks every address, Per24 walks /24 indices
// (the low octet is drawn fresh at random for every send), Local walks the
// host part of a subnet.
struct PoolSpec {
  PoolKind kind = PoolKind::FullV4;
  Prefix local;  // meaningful for Local only; mask_len in [8, 30]

  static PoolSpec full_v4() { return {PoolKind::FullV4, {}}; }
  static PoolSpec per24() { return {PoolKind::Per24, {}}; }
  static PoolSpec local_subnet(Prefix p) { return {PoolKind::Local, p}; }

  // Pool sizes are powers of two by construction.
  uint64_t size() const;
  // Width of the pool index in bits.
  unsigned index_bits() const;

  bool operator==(const PoolSpec&) const = default;
};

// Returns the offending constraint, or nullptr if the spec is valid.
const char* validate(const PoolSpec& pool);

// Ordering state. PureRandom draws with replacement from `seed`'s stream;
// Permutation walks a keyed full-cycle permutation of the pool, visiting
// every element exactly once per epoch. When repeat_across_epochs is set
// (the default) the walk repeats identically after wrapping; otherwise the
// permutation is re-keyed with the epoch.
struct OrderSpec {
  OrderKind kind = OrderKind::Random;
  uint64_t seed = 0;      // PureRandom
  uint64_t key = 0;       // Permutation
  uint32_t epoch = 0;     // 24-bit, carried on the wire
  uint64_t cursor = 0;    // position within the current epoch
  bool repeat_across_epochs = true;

  static OrderSpec pure_random(uint64_t seed) {
    OrderSpec o;
    o.kind = OrderKind::Random;
    o.seed = seed;
    return o;
  }
  static OrderSpec permutation(uint64_t key, bool repeat = true) {
    OrderSpec o;
    o.kind = OrderKind::Permutation;
    o.key = key;
    o.repeat_across_epochs = repeat;
    return o;
  }

  bool operator==(const OrderSpec&) const = default;
};

struct Schedule {
  PoolSpec pool;
  OrderSpec order;

  bool operator==(const Schedule&) const = default;
};

// Stateless accessor for the keyed permutation: a bijection on
// [0, pool_size) for any fixed key. pool_size must be a power of two;
// index must be below it. Built as a 4-round Feistel network over
// log2(pool_size) bits with a splitmix round function, so random access
// needs no per-pool memory.
uint64_t permutation_at(uint64_t key, uint64_t pool_size, uint64_t index);

// Advances the schedule one slot and returns the destination address.
// The Rng supplies the PureRandom draws and the Per24 low octet; the
// permutation path consumes no randomness.
Ipv4 next_destination(Schedule& sched, Rng& rng);

// TTL for a local heartbeat: farther (in prefix terms) targets get a
// larger scope, clamped to [1, 16] to bound how far an LHB can leak.
uint8_t lhb_ttl(Ipv4 src, Ipv4 dst);

// Probability that one send lands inside a lens of mask m. Uniform over
// the lens for FullV4 (m <= 32) and Per24 (m <= 24; the random low octet
// keeps sub-/24 lenses uniform too, but they are rejected rather than
// modeled). Unsupported for Local pools.
double hit_probability(const PoolSpec& pool, unsigned lens_mask);

// Expected sends per sender for full pool coverage when `senders` hosts
// split the work. Permutation orders cover exactly pool/senders; random
// orders pay the coupon-collector factor H(pool).
double coverage_estimate(uint64_t pool_size, uint64_t senders,
                         OrderKind order);

// Total messages for every pool element to probe every pool element
// (pool_size^2, e.g. 2^64 for the full v4 pool).
unsigned __int128 all_pairs_total(uint64_t pool_size);
std::string u128_to_string(unsigned __int128 v);

// Harmonic number H(n); exact summation for small n, asymptotic above.
double harmonic(uint64_t n);

}  // namespace ihb::schedule
