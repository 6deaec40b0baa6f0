#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ihb/rng.hpp"
#include "ihb/wire.hpp"

namespace ihb::testing {

// Uniformly random heartbeat satisfying every wire invariant.
inline wire::Heartbeat random_valid_heartbeat(Rng& rng,
                                              bool allow_integrity = true) {
  wire::Heartbeat hb;
  hb.kind = rng.next_bool(0.2) ? wire::HeartbeatKind::Lhb
                               : wire::HeartbeatKind::Ihb;
  hb.host_id = static_cast<uint16_t>(rng.next_below(1u << 16));
  hb.rate_uhz = static_cast<uint32_t>(rng.next_below(0xffffffffull) + 1);
  hb.orig_ttl = static_cast<uint8_t>(rng.next_below(255) + 1);
  hb.timestamp_ns = rng.next_u64();
  if (hb.kind == wire::HeartbeatKind::Lhb) {
    hb.pool.pool = wire::PoolKind::Local;
  } else {
    hb.pool.pool = rng.next_bool(0.5) ? wire::PoolKind::FullV4
                                      : wire::PoolKind::Per24;
  }
  hb.pool.order = rng.next_bool(0.5) ? wire::OrderKind::Random
                                     : wire::OrderKind::Permutation;
  hb.pool.epoch = static_cast<uint32_t>(rng.next_below(1u << 24));
  hb.seq = rng.next_u32();
  if (allow_integrity && rng.next_bool(0.3)) {
    wire::IntegrityBlock block;
    block.chain_epoch = static_cast<uint16_t>(rng.next_below(1u << 16));
    block.key_index = rng.next_u32();
    for (auto& b : block.mac) b = static_cast<uint8_t>(rng.next_below(256));
    for (auto& b : block.disclosed_key) {
      b = static_cast<uint8_t>(rng.next_below(256));
    }
    hb.integrity = block;
  }
  return hb;
}

inline std::vector<uint8_t> parse_hex(const std::string& hex) {
  std::vector<uint8_t> out;
  for (size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<uint8_t>(
        std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

// name -> bytes from the golden fixture file.
inline std::vector<std::pair<std::string, std::vector<uint8_t>>>
load_golden_fixtures() {
  std::ifstream in(std::string(IHB_FIXTURE_DIR) + "/golden_heartbeats.txt");
  std::vector<std::pair<std::string, std::vector<uint8_t>>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string name, hex;
    ss >> name >> hex;
    out.emplace_back(name, parse_hex(hex));
  }
  return out;
}

}  // namespace ihb::testing
