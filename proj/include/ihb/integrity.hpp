#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "ihb/wire.hpp"

// Delayed-key-disclosure authentication. Each sender interface owns a
// one-way hash chain K_0 .. K_N with K_j = H(K_{j+1}); message i is MACed
// with K_i, and K_{i-d} rides along in message i's integrity block
// (disclosure lag d, default 1). An observer can verify message i once any
// message j > i + d - 1 has arrived, because every later disclosed key
// hashes back down the chain to K_i. An on-path forger would need a chain
// key before its disclosure; after disclosure the verifier's
// strictly-increasing index rule rejects the stale index. A side effect is
// that an honest message delayed past its own key's disclosure is also
// rejected; d bounds that window.
//
// Primitives: SHA-256 truncated to 16 bytes for the chain step, and
// HMAC-SHA-256 truncated to 16 bytes for the tag. The MAC input is the
// 4-byte source address followed by the canonical encoding with the mac
// field zeroed, so a replay under a different source fails verification.
namespace ihb::integrity {

using Key = std::array<uint8_t, 16>;

// One chain step downward: K_j = chain_step(K_{j+1}).
Key chain_step(const Key& k);
// chain_step applied `times` times.
Key chain_walk(Key k, uint64_t times);
// 16-byte tag over src_addr || message bytes.
Key mac_tag(const Key& key, uint32_t src_addr, std::span<const uint8_t> msg);

struct ChainConfig {
  uint64_t seed = 0;
  uint32_t length = 1u << 20;  // N
  uint32_t disclosure_lag = 1;  // d
};

// Sender-side chain. Owned by exactly one emission loop.
class ChainState {
 public:
  // Derives K_N from the seed and hashes down to K_0. length >= 2.
  ChainState(uint64_t seed, uint32_t length, uint32_t disclosure_lag = 1);
  explicit ChainState(const ChainConfig& cfg)
      : ChainState(cfg.seed, cfg.length, cfg.disclosure_lag) {}

  // Attaches an integrity block to hb (MAC computed with K_cursor over the
  // encoding with the mac zeroed) and advances the cursor. Rolls into a
  // fresh epoch/chain when the current one is exhausted.
  wire::Heartbeat sign(wire::Heartbeat hb, uint32_t src_addr);

  const Key& key_at(uint32_t index) const { return keys_.at(index); }
  uint32_t cursor() const { return cursor_; }
  uint16_t epoch() const { return epoch_; }
  uint32_t length() const { return length_; }

 private:
  void derive_chain();

  uint64_t seed_;
  uint32_t length_;
  uint32_t lag_;
  uint16_t epoch_ = 0;
  uint32_t cursor_ = 1;
  std::vector<Key> keys_;  // K_0 .. K_N
};

enum class VerifyStatus : uint8_t { Authenticated, Buffered, Forged };

struct VerifyOutcome {
  VerifyStatus status = VerifyStatus::Buffered;
  // Sequence numbers whose messages this arrival's disclosure settled.
  std::vector<uint32_t> newly_verified;
  std::vector<uint32_t> newly_forged;
  uint64_t dropped = 0;  // buffer-overflow evictions caused by this call
};

struct VerifierConfig {
  uint32_t disclosure_lag = 1;
  size_t buffer_capacity = 64;
  // Upper bound on the chain distance the verifier will walk for one
  // disclosure; a forged far-future index must not buy a long hash loop.
  uint64_t max_skip = 1u << 20;
};

// Observer-side verification state for one (source, HostID). The first
// disclosure anchors the chain (trust on first use); afterwards a disclosed
// key is accepted only if hashing it back reproduces the anchor.
class VerifierState {
 public:
  explicit VerifierState(VerifierConfig cfg = {}) : cfg_(cfg) {}

  VerifyOutcome observe(uint32_t src_addr, const wire::Heartbeat& hb);

  bool anchored() const { return have_anchor_; }
  uint32_t anchor_index() const { return anchor_index_; }
  uint64_t dropped_total() const { return dropped_total_; }
  size_t buffered() const { return buffer_.size(); }

 private:
  struct Pending {
    uint32_t src_addr;
    wire::Heartbeat hb;
  };

  VerifyOutcome accept_key(const Key& key, uint32_t index,
                           VerifyOutcome outcome);

  VerifierConfig cfg_;
  uint16_t epoch_ = 0;
  bool have_anchor_ = false;
  Key anchor_key_{};
  uint32_t anchor_index_ = 0;
  std::deque<Pending> buffer_;
  uint64_t dropped_total_ = 0;
};

// Spec-shaped entry point: feed one observed heartbeat to the per-source
// verifier. The heartbeat must carry an integrity block.
VerifyOutcome verify(VerifierState& state, const wire::ObservedHeartbeat& obs);

}  // namespace ihb::integrity
