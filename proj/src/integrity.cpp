#include "ihb/integrity.hpp"

#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "ihb/rng.hpp"

namespace ihb::integrity {

namespace {

constexpr char kChainLabel[] = "ihb-chain-v1";

Key derive_anchor(uint64_t seed, uint16_t epoch) {
  uint8_t material[sizeof(kChainLabel) + 10];
  std::memcpy(material, kChainLabel, sizeof(kChainLabel));
  uint8_t* p = material + sizeof(kChainLabel);
  for (int i = 7; i >= 0; --i) *p++ = static_cast<uint8_t>(seed >> (8 * i));
  *p++ = static_cast<uint8_t>(epoch >> 8);
  *p++ = static_cast<uint8_t>(epoch);
  uint8_t digest[SHA256_DIGEST_LENGTH];
  SHA256(material, sizeof(material), digest);
  Key k;
  std::memcpy(k.data(), digest, k.size());
  return k;
}

bool is_zero(const Key& k) {
  return std::all_of(k.begin(), k.end(), [](uint8_t b) { return b == 0; });
}

}  // namespace

Key chain_step(const Key& k) {
  uint8_t digest[SHA256_DIGEST_LENGTH];
  SHA256(k.data(), k.size(), digest);
  Key out;
  std::memcpy(out.data(), digest, out.size());
  return out;
}

Key chain_walk(Key k, uint64_t times) {
  for (uint64_t i = 0; i < times; ++i) k = chain_step(k);
  return k;
}

Key mac_tag(const Key& key, uint32_t src_addr, std::span<const uint8_t> msg) {
  std::vector<uint8_t> input;
  input.reserve(4 + msg.size());
  for (int i = 3; i >= 0; --i) {
    input.push_back(static_cast<uint8_t>(src_addr >> (8 * i)));
  }
  input.insert(input.end(), msg.begin(), msg.end());
  uint8_t digest[SHA256_DIGEST_LENGTH];
  unsigned len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), input.data(),
       input.size(), digest, &len);
  Key out;
  std::memcpy(out.data(), digest, out.size());
  return out;
}

ChainState::ChainState(uint64_t seed, uint32_t length, uint32_t disclosure_lag)
    : seed_(seed), length_(length), lag_(disclosure_lag) {
  if (length < 2) throw std::invalid_argument("chain length must be >= 2");
  if (lag_ < 1) throw std::invalid_argument("disclosure lag must be >= 1");
  derive_chain();
}

void ChainState::derive_chain() {
  keys_.assign(length_ + 1, Key{});
  keys_[length_] = derive_anchor(seed_, epoch_);
  for (uint32_t j = length_; j > 0; --j) keys_[j - 1] = chain_step(keys_[j]);
}

wire::Heartbeat ChainState::sign(wire::Heartbeat hb, uint32_t src_addr) {
  if (cursor_ > length_) {
    // Exhausted: fresh epoch, fresh chain. The epoch travels on the wire
    // so verifiers know to re-anchor.
    epoch_++;
    cursor_ = 1;
    derive_chain();
  }
  wire::IntegrityBlock block;
  block.chain_epoch = epoch_;
  block.key_index = cursor_;
  block.mac = Key{};
  block.disclosed_key =
      cursor_ >= lag_ ? keys_[cursor_ - lag_] : Key{};  // zeros before K_0
  hb.integrity = block;
  const std::vector<uint8_t> bytes = wire::encode(hb);
  hb.integrity->mac = mac_tag(keys_[cursor_], src_addr, bytes);
  cursor_++;
  return hb;
}

VerifyOutcome VerifierState::accept_key(const Key& key, uint32_t index,
                                        VerifyOutcome outcome) {
  anchor_key_ = key;
  anchor_index_ = index;
  have_anchor_ = true;
  // Settle every buffered message whose key is now derivable.
  for (auto it = buffer_.begin(); it != buffer_.end();) {
    if (it->hb.integrity->key_index > anchor_index_) {
      ++it;
      continue;
    }
    const Key msg_key =
        chain_walk(anchor_key_, anchor_index_ - it->hb.integrity->key_index);
    wire::Heartbeat zeroed = it->hb;
    zeroed.integrity->mac = Key{};
    const Key expect = mac_tag(msg_key, it->src_addr, wire::encode(zeroed));
    if (expect == it->hb.integrity->mac) {
      outcome.newly_verified.push_back(it->hb.seq);
    } else {
      outcome.newly_forged.push_back(it->hb.seq);
    }
    it = buffer_.erase(it);
  }
  return outcome;
}

VerifyOutcome VerifierState::observe(uint32_t src_addr,
                                     const wire::Heartbeat& hb) {
  if (!hb.integrity) {
    throw std::invalid_argument("verifier fed a heartbeat without integrity");
  }
  VerifyOutcome outcome;
  const wire::IntegrityBlock& block = *hb.integrity;

  if (block.chain_epoch < epoch_) {
    outcome.status = VerifyStatus::Forged;  // stale epoch
    return outcome;
  }
  if (block.chain_epoch > epoch_) {
    // Sender rolled its chain; the old anchor is useless and anything
    // still buffered can never verify.
    epoch_ = block.chain_epoch;
    have_anchor_ = false;
    outcome.dropped += buffer_.size();
    buffer_.clear();
  }

  if (have_anchor_ && block.key_index <= anchor_index_) {
    // Key for this index was already disclosed; a fresh message claiming
    // it is a post-disclosure forgery (or a message delayed past its
    // disclosure window, which is indistinguishable).
    outcome.status = VerifyStatus::Forged;
    return outcome;
  }

  if (!is_zero(block.disclosed_key) &&
      block.key_index >= cfg_.disclosure_lag) {
    const uint32_t disclosed_index = block.key_index - cfg_.disclosure_lag;
    if (!have_anchor_) {
      // Trust on first use: the first disclosure defines the chain.
      outcome = accept_key(block.disclosed_key, disclosed_index,
                           std::move(outcome));
    } else if (disclosed_index > anchor_index_) {
      const uint64_t gap = disclosed_index - anchor_index_;
      if (gap > cfg_.max_skip ||
          chain_walk(block.disclosed_key, gap) != anchor_key_) {
        outcome.status = VerifyStatus::Forged;  // not on the chain
        return outcome;
      }
      outcome = accept_key(block.disclosed_key, disclosed_index,
                           std::move(outcome));
    } else if (block.disclosed_key !=
               chain_walk(anchor_key_, anchor_index_ - disclosed_index)) {
      outcome.status = VerifyStatus::Forged;  // contradicts the chain
      return outcome;
    }
  }

  buffer_.push_back(Pending{src_addr, hb});
  while (buffer_.size() > cfg_.buffer_capacity) {
    buffer_.pop_front();
    outcome.dropped++;
  }
  dropped_total_ += outcome.dropped;
  outcome.status = outcome.newly_verified.empty() ? VerifyStatus::Buffered
                                                  : VerifyStatus::Authenticated;
  return outcome;
}

VerifyOutcome verify(VerifierState& state, const wire::ObservedHeartbeat& obs) {
  return state.observe(obs.src_addr, obs.body);
}

}  // namespace ihb::integrity
