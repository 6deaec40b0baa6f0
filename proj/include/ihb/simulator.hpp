#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ihb/inference.hpp"
#include "ihb/ip.hpp"
#include "ihb/schedule.hpp"
#include "ihb/sender.hpp"
#include "ihb/wire.hpp"

// Deterministic simulation of a heartbeat-sending population watched
// through one lens. Hosts run the real sender implementation against a
// virtual clock; the "network" is scripted per-host hop counts plus
// outage/route/load-balance/spoofer events. Identical seeds give byte-
// identical traces.
namespace ihb::simulator {

struct HostIdPolicy {
  enum class Mode : uint8_t { Fixed, Rotating };
  Mode mode = Mode::Fixed;
  uint16_t initial = 0;
  double rotation_period_s = 0;  // Rotating only
};

struct PathSegment {
  double start_s = 0;
  int hop_count = 0;
};

struct HostSpec {
  std::vector<Ipv4> addresses;  // one protocol instance per address
  HostIdPolicy host_id;
  uint32_t rate_uhz = 1000000;
  schedule::PoolSpec pool = schedule::PoolSpec::full_v4();
  schedule::OrderSpec order = schedule::OrderSpec::pure_random(0);
  bool pair_mode = false;
  uint8_t ihb_ttl = 64;
  wire::TransportKind transport = wire::TransportKind::udp();
  std::optional<integrity::ChainConfig> integrity;
  std::vector<PathSegment> path{{0, 10}};
  std::optional<Ipv4> nat_public;  // source address the network sees
};

struct OutagePrefixEvent {
  Prefix prefix;
  double start_s = 0;
  double end_s = 0;
};

struct RouteShiftEvent {
  Prefix prefix;
  double start_s = 0;
  int delta_hops = 0;
};

struct LoadBalanceEvent {
  size_t host_index = 0;
  int hop_a = 0;
  int hop_b = 0;
  double split = 0.5;  // probability of hop_a
  double start_s = 0;
};

// Adversary injecting wire-valid heartbeats with forged fields. The
// declared rate need not match the emission rate; that mismatch is part
// of what the observer should catch.
struct SpooferEvent {
  Ipv4 forged_src = 0;
  uint16_t forged_host_id = 0;
  uint32_t declared_rate_uhz = 1000000;
  uint32_t emission_rate_uhz = 1000000;
  int hop_count = 0;
  uint8_t orig_ttl = 64;
  double start_s = 0;
  double end_s = 0;
};

struct Scenario {
  double duration_s = 0;
  Prefix lens;
  uint64_t seed = 0;
  double per_hop_delay_s = 0.005;
  std::vector<HostSpec> hosts;
  std::vector<OutagePrefixEvent> outages;
  std::vector<RouteShiftEvent> route_shifts;
  std::vector<LoadBalanceEvent> load_balances;
  std::vector<SpooferEvent> spoofers;
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

// Empty when valid; otherwise one line per offending field/event.
std::vector<std::string> validate(const Scenario& sc);

// Strict JSON parsing (unknown keys rejected, seed mandatory).
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& sc);

// Stable identifier tying a trace, its truth, and downstream reports to
// one (scenario, seed) run.
std::string run_id_of(const Scenario& sc);

struct TruthEmission {
  uint64_t send_ns = 0;
  Ipv4 src = 0;  // as the network sees it (post-NAT, or forged)
  uint16_t host_id = 0;
  uint32_t seq = 0;
  Ipv4 dst = 0;
  int hops = 0;
  bool in_lens = false;
  bool suppressed = false;   // source-side outage active
  bool ttl_expired = false;  // hop count consumed the originating TTL
  bool spoofed = false;
  uint64_t recv_ns = 0;  // set iff delivered into the trace
  uint32_t host_index = UINT32_MAX;  // UINT32_MAX for spoofers

  bool delivered() const {
    return in_lens && !suppressed && !ttl_expired;
  }
};

struct TruthRotation {
  uint64_t t_ns = 0;
  uint32_t host_index = 0;
  uint16_t old_id = 0;
  uint16_t new_id = 0;
};

struct GroundTruthLog {
  std::string run_id;
  double duration_s = 0;
  Prefix lens;
  uint64_t seed = 0;
  std::vector<TruthEmission> emissions;
  std::vector<TruthRotation> rotations;
  std::vector<OutagePrefixEvent> outages;
  std::vector<RouteShiftEvent> route_shifts;
  std::vector<LoadBalanceEvent> load_balances;
  std::vector<SpooferEvent> spoofers;
  // Host addresses as observed (post-NAT), for scoring.
  std::vector<std::vector<Ipv4>> host_addresses;
};

struct RunResult {
  std::string run_id;
  std::vector<wire::ObservedHeartbeat> trace;  // sorted by arrival
  GroundTruthLog truth;
};

// The sender configuration a scenario host runs; exposed so tests can
// replay a host standalone and compare streams.
sender::SenderConfig sender_config_for_host(const Scenario& sc,
                                            size_t host_index);

RunResult run(const Scenario& sc);

// --- scoring ---

struct OutageScore {
  Prefix prefix;
  double start_s = 0;
  double end_s = 0;
  bool detected = false;
  double latency_s = -1;  // first flagged assessment - outage start
};

struct Metrics {
  std::string run_id;
  std::vector<OutageScore> outages;
  uint64_t healthy_assessments = 0;
  uint64_t flagged_healthy = 0;
  double false_positive_rate = 0;  // over healthy assessments
  uint64_t spoofed_delivered = 0;
  uint64_t spoof_alerts = 0;
  uint64_t spoof_matched = 0;
  double spoof_precision = -1;  // -1 = undefined (no denominator)
  double spoof_recall = -1;
  uint64_t alias_truth_sets = 0;
  uint64_t alias_reported_sets = 0;
  uint64_t alias_matched_sets = 0;
  double alias_precision = -1;
  double alias_recall = -1;
  uint64_t path_scripted = 0;
  uint64_t path_detected = 0;
  double path_accuracy = -1;
};

nlohmann::json metrics_to_json(const Metrics& m);

// Scores a report bundle against ground truth. The trace is the one the
// reports were computed from; a run-id or arrival-count mismatch is an
// error, not a score of zero.
Metrics evaluate(const std::vector<wire::ObservedHeartbeat>& trace,
                 const GroundTruthLog& truth,
                 const inference::ReportBundle& outputs,
                 const inference::Params& params);

}  // namespace ihb::simulator
