#include "ihb/observer.hpp"

#include <algorithm>

#include "ihb/pcap.hpp"

namespace ihb::observer {

const char* to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::DeclaredRateConflict:
      return "declared_rate_conflict";
    case AnomalyKind::SeqRegression:
      return "seq_regression";
    case AnomalyKind::DuplicateSeq:
      return "duplicate_seq";
    case AnomalyKind::TtlJump:
      return "ttl_jump";
  }
  return "unknown";
}

const SourceState* Snapshot::find(const SourceKey& key) const {
  auto it = std::lower_bound(
      states.begin(), states.end(), key,
      [](const SourceState& s, const SourceKey& k) { return s.key < k; });
  if (it == states.end() || !(it->key == key)) return nullptr;
  return &*it;
}

StateStore::StateStore(StoreConfig cfg) : cfg_(cfg) {}

void StateStore::touch(
    std::unordered_map<SourceKey, Entry, SourceKeyHash>::iterator it) {
  lru_.splice(lru_.end(), lru_, it->second.lru_pos);
}

std::vector<Anomaly> StateStore::ingest(const wire::ObservedHeartbeat& obs) {
  std::lock_guard<std::mutex> lock(mu_);

  if (!cfg_.lens.contains(obs.dst_addr)) {
    throw OutOfLensError("destination " + format_ipv4(obs.dst_addr) +
                         " outside lens " + format_prefix(cfg_.lens));
  }

  const SourceKey key{obs.src_addr, obs.body.host_id};
  auto it = states_.find(key);
  const bool fresh = it == states_.end();
  if (fresh) {
    if (states_.size() >= cfg_.capacity) {
      // Evict the source silent the longest.
      auto victim = states_.find(lru_.front());
      evicted_state_arrivals_ += victim->second.state.total_arrivals();
      evicted_states_++;
      lru_.pop_front();
      states_.erase(victim);
    }
    Entry entry;
    entry.state.key = key;
    entry.state.first_seen_ns = obs.recv_time_ns;
    entry.lru_pos = lru_.insert(lru_.end(), key);
    it = states_.emplace(key, std::move(entry)).first;
  } else {
    touch(it);
  }

  SourceState& st = it->second.state;
  std::vector<Anomaly> anomalies;
  auto flag = [&](AnomalyKind kind, std::string detail) {
    anomalies.push_back(
        Anomaly{kind, key, obs.recv_time_ns, obs.body.seq, std::move(detail)});
  };

  const Arrival arrival{obs.recv_time_ns, obs.body.seq, obs.arrival_ttl,
                        obs.body.orig_ttl, obs.body.timestamp_ns};

  if (!fresh) {
    if (st.declared_rate_uhz != obs.body.rate_uhz) {
      st.rate_conflicts++;
      flag(AnomalyKind::DeclaredRateConflict,
           "rate " + std::to_string(st.declared_rate_uhz) + " -> " +
               std::to_string(obs.body.rate_uhz));
    }

    // Same sequence twice is either the second half of a back-to-back
    // pair (same slot, identical meta-data, near-simultaneous) or a
    // genuine duplicate.
    bool is_pair = false;
    bool is_duplicate = false;
    const size_t lookback = std::min<size_t>(st.history.size(), 64);
    for (size_t i = 0; i < lookback; ++i) {
      const Arrival& prev = st.history[st.history.size() - 1 - i];
      if (prev.seq != obs.body.seq) continue;
      if (prev.orig_ttl == obs.body.orig_ttl &&
          obs.recv_time_ns - prev.recv_time_ns <= cfg_.pair_window_ns) {
        is_pair = true;
      } else {
        is_duplicate = true;
        flag(AnomalyKind::DuplicateSeq,
             "seq " + std::to_string(obs.body.seq) + " repeated");
        st.duplicate_seqs++;
      }
      break;
    }
    if (is_pair) {
      st.pair_echoes++;
    } else if (!is_duplicate && st.any_arrival && obs.body.seq < st.max_seq) {
      st.seq_regressions++;
      flag(AnomalyKind::SeqRegression,
           "seq " + std::to_string(obs.body.seq) + " after " +
               std::to_string(st.max_seq));
    }

    if (!st.history.empty() && !is_pair) {
      const int step =
          std::abs(arrival.hop_count() - st.history.back().hop_count());
      if (step >= cfg_.ttl_jump_threshold) {
        st.ttl_jumps++;
        flag(AnomalyKind::TtlJump,
             "hop count step " + std::to_string(step));
      }
    }
  }

  st.declared_rate_uhz = obs.body.rate_uhz;
  st.last_seen_ns = obs.recv_time_ns;
  if (obs.body.kind == wire::HeartbeatKind::Lhb) {
    st.lhb_count++;
  } else {
    st.ihb_count++;
  }
  if (!st.any_arrival) {
    st.hop_min = st.hop_max = arrival.hop_count();
    st.max_seq = obs.body.seq;
    st.any_arrival = true;
  } else {
    st.hop_min = std::min(st.hop_min, arrival.hop_count());
    st.hop_max = std::max(st.hop_max, arrival.hop_count());
    st.max_seq = std::max(st.max_seq, obs.body.seq);
  }
  st.history.push_back(arrival);
  if (st.history.size() > cfg_.ring_capacity) {
    st.history.pop_front();
    st.ring_evictions++;
  }

  if (cfg_.verify_integrity && obs.body.integrity) {
    if (!st.verifier) st.verifier.emplace(cfg_.verifier);
    const auto outcome = st.verifier->observe(obs.src_addr, obs.body);
    st.authenticated += outcome.newly_verified.size();
    st.forged += outcome.newly_forged.size();
    if (outcome.status == integrity::VerifyStatus::Forged) st.forged++;
  }

  ingested_++;
  return anomalies;
}

Snapshot StateStore::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  Snapshot snap;
  snap.lens = cfg_.lens;
  snap.ingested = ingested_;
  snap.evicted_states = evicted_states_;
  snap.evicted_state_arrivals = evicted_state_arrivals_;
  snap.states.reserve(states_.size());
  for (const auto& [key, entry] : states_) snap.states.push_back(entry.state);
  std::sort(snap.states.begin(), snap.states.end(),
            [](const SourceState& a, const SourceState& b) {
              return a.key < b.key;
            });
  return snap;
}

IngestStats load_pcap(
    const std::string& path, const Prefix& lens,
    const std::function<void(const wire::ObservedHeartbeat&)>& sink,
    uint16_t udp_port) {
  IngestStats stats;
  pcap::Reader reader(path);
  pcap::Packet pkt;
  while (reader.next(pkt)) {
    stats.packets++;
    pcap::ParsedFrame frame;
    if (!pcap::parse_frame(pkt.data, reader.link_type(), frame)) {
      stats.non_heartbeat++;
      continue;
    }
    wire::DatagramSummary summary;
    summary.proto = frame.proto;
    summary.icmp_type = frame.icmp_type;
    summary.icmp_code = frame.icmp_code;
    summary.udp_dst_port = frame.udp_dst_port;
    summary.payload_prefix = std::span<const uint8_t>(
        frame.payload.data(), std::min<size_t>(frame.payload.size(), 8));
    if (wire::classify(summary, udp_port) != wire::Classification::Heartbeat) {
      stats.non_heartbeat++;
      continue;
    }
    const auto decoded = wire::decode(frame.payload);
    if (!decoded.ok()) {
      stats.malformed++;
      continue;
    }
    if (!lens.contains(frame.dst_addr)) {
      stats.out_of_lens++;
      continue;
    }
    wire::ObservedHeartbeat obs;
    obs.recv_time_ns = pkt.ts_ns;
    obs.src_addr = frame.src_addr;
    obs.dst_addr = frame.dst_addr;
    obs.arrival_ttl = frame.ttl;
    obs.transport = frame.proto == wire::DatagramSummary::Proto::Udp
                        ? wire::TransportKind::udp(frame.udp_dst_port)
                        : wire::TransportKind::icmp();
    obs.body = decoded.hb;
    stats.yielded++;
    sink(obs);
  }
  return stats;
}

}  // namespace ihb::observer
