#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ihb/integrity.hpp"
#include "ihb/ip.hpp"
#include "ihb/wire.hpp"

namespace ihb::observer {

// A HostID is meaningless on its own (collisions are deliberate); state is
// always keyed by the (source address, HostID) pair. Two HostIDs behind
// one address therefore become two states, which is itself the NAT signal.
struct SourceKey {
  Ipv4 src_addr = 0;
  uint16_t host_id = 0;

  bool operator==(const SourceKey&) const = default;
  auto operator<=>(const SourceKey&) const = default;
};

struct SourceKeyHash {
  size_t operator()(const SourceKey& k) const {
    return std::hash<uint64_t>{}((uint64_t{k.src_addr} << 16) | k.host_id);
  }
};

struct Arrival {
  uint64_t recv_time_ns = 0;
  uint32_t seq = 0;
  uint8_t arrival_ttl = 0;
  uint8_t orig_ttl = 0;
  uint64_t timestamp_ns = 0;

  int hop_count() const {
    return static_cast<int>(orig_ttl) - static_cast<int>(arrival_ttl);
  }
  // Raw receiver-minus-sender delta; only its changes are meaningful
  // without clock synchronization.
  int64_t clock_offset_ns() const {
    return static_cast<int64_t>(recv_time_ns) -
           static_cast<int64_t>(timestamp_ns);
  }
};

struct SourceState {
  SourceKey key;
  uint32_t declared_rate_uhz = 0;  // most recent rate field
  uint64_t first_seen_ns = 0;
  uint64_t last_seen_ns = 0;

  std::deque<Arrival> history;     // bounded ring, oldest first
  uint64_t ring_evictions = 0;     // arrivals pushed out of the ring

  int hop_min = 0;                 // extremes over everything ever seen
  int hop_max = 0;

  uint64_t rate_conflicts = 0;
  uint64_t seq_regressions = 0;
  uint64_t duplicate_seqs = 0;
  uint64_t ttl_jumps = 0;
  uint64_t pair_echoes = 0;        // back-to-back duplicates, not anomalies

  uint64_t ihb_count = 0;
  uint64_t lhb_count = 0;

  uint32_t max_seq = 0;
  bool any_arrival = false;

  // Present once this source sends integrity blocks.
  std::optional<integrity::VerifierState> verifier;
  uint64_t authenticated = 0;
  uint64_t forged = 0;

  uint64_t total_arrivals() const { return history.size() + ring_evictions; }
};

enum class AnomalyKind : uint8_t {
  DeclaredRateConflict,
  SeqRegression,
  DuplicateSeq,
  TtlJump,
};

const char* to_string(AnomalyKind kind);

struct Anomaly {
  AnomalyKind kind;
  SourceKey key;
  uint64_t recv_time_ns = 0;
  uint32_t seq = 0;
  std::string detail;
};

struct StoreConfig {
  Prefix lens;                      // dst filter; m <= 24 for outage math
  size_t capacity = 1u << 20;       // max SourceStates, LRU by last_seen
  size_t ring_capacity = 1024;      // arrivals kept per state
  int ttl_jump_threshold = 3;       // hop-count step flagged as a jump
  uint64_t pair_window_ns = 100'000'000;  // back-to-back pair tolerance
  bool verify_integrity = true;
  integrity::VerifierConfig verifier;
};

class OutOfLensError : public std::runtime_error {
 public:
  explicit OutOfLensError(const std::string& what) : std::runtime_error(what) {}
};

// Point-in-time view of the whole store. States are sorted by key, so two
// stores fed the same records produce identical snapshots.
struct Snapshot {
  Prefix lens;
  uint64_t ingested = 0;
  uint64_t evicted_states = 0;
  uint64_t evicted_state_arrivals = 0;
  std::vector<SourceState> states;

  const SourceState* find(const SourceKey& key) const;
};

// Single-writer ingestion with snapshot isolation for readers.
class StateStore {
 public:
  explicit StateStore(StoreConfig cfg);

  // Updates per-source state and returns the meta-data conflicts this
  // arrival raised. The destination must be inside the lens.
  std::vector<Anomaly> ingest(const wire::ObservedHeartbeat& obs);

  Snapshot snapshot() const;

  uint64_t ingested() const { return ingested_; }
  size_t source_count() const { return states_.size(); }
  const StoreConfig& config() const { return cfg_; }

 private:
  struct Entry {
    SourceState state;
    std::list<SourceKey>::iterator lru_pos;
  };

  void touch(std::unordered_map<SourceKey, Entry, SourceKeyHash>::iterator it);

  StoreConfig cfg_;
  mutable std::mutex mu_;
  std::unordered_map<SourceKey, Entry, SourceKeyHash> states_;
  std::list<SourceKey> lru_;  // front = least recently seen
  uint64_t ingested_ = 0;
  uint64_t evicted_states_ = 0;
  uint64_t evicted_state_arrivals_ = 0;
};

// Result of replaying a capture or record log through classify/decode.
struct IngestStats {
  uint64_t packets = 0;        // datagrams examined
  uint64_t non_heartbeat = 0;  // classify() rejected
  uint64_t malformed = 0;      // classified as heartbeat, failed decode
  uint64_t out_of_lens = 0;    // valid heartbeat, dst outside the lens
  uint64_t yielded = 0;
};

// Reads a classic pcap file (Ethernet or raw-IP link type, IPv4) and
// yields the heartbeats observed inside the lens; arrival TTLs come from
// the IP header. Malformed heartbeats are counted, never yielded. Throws
// PcapError (with the file offset) on a corrupt file.
IngestStats load_pcap(const std::string& path, const Prefix& lens,
                      const std::function<void(const wire::ObservedHeartbeat&)>& sink,
                      uint16_t udp_port = wire::kDefaultUdpPort);

}  // namespace ihb::observer
