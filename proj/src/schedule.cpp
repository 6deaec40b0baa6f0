#include "ihb/schedule.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace ihb::schedule {

uint64_t PoolSpec::size() const { return uint64_t{1} << index_bits(); }

unsigned PoolSpec::index_bits() const {
  switch (kind) {
    case PoolKind::FullV4:
      return 32;
    case PoolKind::Per24:
      return 24;
    case PoolKind::Local:
      return 32u - local.mask_len;
  }
  return 0;
}

const char* validate(const PoolSpec& pool) {
  if (pool.kind == PoolKind::Local &&
      (pool.local.mask_len < 8 || pool.local.mask_len > 30)) {
    return "local prefix length must be in [8, 30]";
  }
  return nullptr;
}

namespace {

constexpr uint64_t mask_bits(unsigned bits) {
  return bits >= 64 ? ~uint64_t{0} : (uint64_t{1} << bits) - 1;
}

constexpr uint64_t kRoundSalt[4] = {
    0x9d3c5e1b7a2f4680ull,
    0x517cc1b727220a95ull,
    0xe7037ed1a0b428dbull,
    0x2f5a1c6e9b4d8037ull,
};

// One key schedule per call is cheap (four mixes) and keeps the accessor
// stateless.
uint64_t feistel(uint64_t key, unsigned width, uint64_t index) {
  if (width == 0) return 0;
  unsigned lw = width / 2;        // left width; 0 when width == 1
  unsigned rw = width - lw;       // right width
  uint64_t left = index >> rw;
  uint64_t right = index & mask_bits(rw);
  for (int round = 0; round < 4; ++round) {
    const uint64_t subkey = mix64(key ^ kRoundSalt[round]);
    const uint64_t f = mix64(right ^ subkey) & mask_bits(lw);
    const uint64_t new_right = left ^ f;
    left = right;
    right = new_right;
    std::swap(lw, rw);
  }
  // Four rounds = two swaps, so widths are back to the initial split.
  return (left << rw) | right;
}

uint64_t effective_key(const OrderSpec& order) {
  if (order.repeat_across_epochs) return order.key;
  return order.key ^ mix64(order.epoch);
}

}  // namespace

uint64_t permutation_at(uint64_t key, uint64_t pool_size, uint64_t index) {
  if (pool_size == 0 || !std::has_single_bit(pool_size)) {
    throw std::invalid_argument("pool_size must be a power of two");
  }
  if (index >= pool_size) {
    throw std::out_of_range("permutation index out of range");
  }
  return feistel(key, static_cast<unsigned>(std::countr_zero(pool_size)),
                 index);
}

Ipv4 next_destination(Schedule& sched, Rng& rng) {
  if (const char* err = validate(sched.pool)) throw std::invalid_argument(err);

  const uint64_t pool_size = sched.pool.size();
  uint64_t element;
  OrderSpec& order = sched.order;
  switch (order.kind) {
    case OrderKind::Random:
      element = rng.next_below(pool_size);
      break;
    case OrderKind::Permutation:
      element = feistel(effective_key(order), sched.pool.index_bits(),
                        order.cursor);
      if (++order.cursor == pool_size) {
        order.cursor = 0;
        order.epoch = (order.epoch + 1) & 0xffffffu;
      }
      break;
    default:
      throw std::invalid_argument("unknown order kind");
  }

  switch (sched.pool.kind) {
    case PoolKind::FullV4:
      return static_cast<Ipv4>(element);
    case PoolKind::Per24:
      // The /24 comes from the order; the low octet is chosen
      // independently at random every time.
      return static_cast<Ipv4>((element << 8) | rng.next_below(256));
    case PoolKind::Local:
      return sched.pool.local.addr | static_cast<Ipv4>(element);
  }
  throw std::invalid_argument("unknown pool kind");
}

uint8_t lhb_ttl(Ipv4 src, Ipv4 dst) {
  if (src == dst) throw std::invalid_argument("lhb_ttl: src == dst");
  const int ttl = 32 - static_cast<int>(common_prefix_len(src, dst));
  return static_cast<uint8_t>(std::clamp(ttl, 1, 16));
}

double hit_probability(const PoolSpec& pool, unsigned lens_mask) {
  switch (pool.kind) {
    case PoolKind::FullV4:
      if (lens_mask > 32) {
        throw std::invalid_argument("lens mask must be <= 32");
      }
      return std::exp2(-static_cast<double>(lens_mask));
    case PoolKind::Per24:
      if (lens_mask > 24) {
        throw std::invalid_argument(
            "lens mask must be <= 24 for per-/24 pools");
      }
      return std::exp2(-static_cast<double>(lens_mask));
    case PoolKind::Local:
      throw std::invalid_argument(
          "hit_probability is undefined for local pools");
  }
  throw std::invalid_argument("unknown pool kind");
}

double harmonic(uint64_t n) {
  if (n == 0) return 0.0;
  if (n <= (1u << 20)) {
    double h = 0.0;
    for (uint64_t k = n; k >= 1; --k) h += 1.0 / static_cast<double>(k);
    return h;
  }
  // Euler-Maclaurin; error < 1/(120 n^4), far below double noise here.
  constexpr double kEulerGamma = 0.57721566490153286;
  const double x = static_cast<double>(n);
  return std::log(x) + kEulerGamma + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x);
}

double coverage_estimate(uint64_t pool_size, uint64_t senders,
                         OrderKind order) {
  if (senders == 0) throw std::invalid_argument("senders must be >= 1");
  const double pool = static_cast<double>(pool_size);
  switch (order) {
    case OrderKind::Permutation:
      return pool / static_cast<double>(senders);
    case OrderKind::Random:
      return pool * harmonic(pool_size) / static_cast<double>(senders);
  }
  throw std::invalid_argument("unknown order kind");
}

unsigned __int128 all_pairs_total(uint64_t pool_size) {
  return static_cast<unsigned __int128>(pool_size) * pool_size;
}

std::string u128_to_string(unsigned __int128 v) {
  if (v == 0) return "0";
  std::string out;
  while (v > 0) {
    out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return out;
}

}  // namespace ihb::schedule
