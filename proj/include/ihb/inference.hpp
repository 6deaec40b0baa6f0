#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ihb/ip.hpp"
#include "ihb/observer.hpp"

namespace ihb::inference {

using observer::SourceKey;
using observer::SourceState;

// ---------------------------------------------------------------------------
// Closed-form models
// ---------------------------------------------------------------------------

// Probability that `silence_s` seconds without an arrival is consistent
// with the source still being reachable: each of the s = floor(rate * dt)
// send opportunities independently missed a 2^-m lens. Exact Bernoulli
// form; equals 1 at dt = 0 and decays monotonically.
double silence_consistency(uint32_t rate_uhz, unsigned lens_mask,
                           double silence_s);

// Poisson alternative exp(-rate * dt * 2^-m), useful when fractional
// opportunity counts matter. Within O(2^-2m) of the Bernoulli form.
double silence_consistency_poisson(uint32_t rate_uhz, unsigned lens_mask,
                                   double silence_s);

// Expected heartbeat arrival rate at a lens of mask m when n participants
// each send r pps: n * r / 2^m.
double expected_arrival_rate(double participants, double rate_pps,
                             unsigned lens_mask);

// Mean sends between consecutive lens hits by the half-range convention:
// 2^m / 2. The median of the underlying geometric, 2^m * ln 2, is a
// different statistic; both are exposed so reports can say which they use.
double expected_interprobe_hits(unsigned lens_mask);
double median_interprobe_hits(unsigned lens_mask);

struct HopCount {
  int hops = 0;
  bool implausible = false;  // arrival TTL above originating TTL

  bool operator==(const HopCount&) const = default;
};

// orig - arrival; a negative result is returned tagged, never clamped,
// because it is spoof evidence rather than noise.
HopCount hop_count(uint8_t orig_ttl, uint8_t arrival_ttl);

// Inverts E[distinct] = K (1 - (1-1/K)^n) to estimate how many hosts sit
// behind one address given `distinct` observed HostIDs from an id space of
// size K. Always >= distinct; errors if distinct >= K (saturated).
double nat_estimate_count(double distinct, double id_space = 65536.0);

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

enum class OutageVerdict : uint8_t { Reachable, SuspectedOutage };

struct OutageAssessment {
  Prefix target;            // the assessed /24 (or /32 for single hosts)
  uint64_t now_ns = 0;
  double silence_s = 0;     // silence of the most recently heard member
  double p_consistent = 1;  // product over members
  double threshold = 0.05;
  uint32_t member_count = 0;
  OutageVerdict verdict = OutageVerdict::Reachable;
};

enum class PathEventKind : uint8_t { RouteChange, LoadBalanced, SharedFateGroup };

struct PathChangeEvent {
  PathEventKind kind = PathEventKind::RouteChange;
  SourceKey key;            // primary source; unset for SharedFateGroup
  uint64_t onset_ns = 0;
  double window_s = 0;
  int before_mode = 0;      // RouteChange
  int after_mode = 0;
  // LoadBalanced: persistent hop values and their overall share.
  std::vector<std::pair<int, double>> modes;
  std::vector<SourceKey> members;  // SharedFateGroup
  int delta_sign = 0;              // sign(after - before)
};

enum class SpoofEvidence : uint8_t { HopCountShrunk, MetaConflict };

struct SpoofAlert {
  SpoofEvidence evidence = SpoofEvidence::HopCountShrunk;
  SourceKey key;
  uint64_t recv_time_ns = 0;
  uint32_t seq = 0;
  int observed_hops = 0;
  int historical_min = 0;
  std::string detail;
};

enum class AliasTier : uint8_t { Candidate, RotationConfirmed };

struct AliasCandidateSet {
  uint16_t host_id = 0;
  std::vector<Ipv4> members;  // sorted, >= 2 entries
  AliasTier tier = AliasTier::Candidate;
  uint64_t window_start_ns = 0;
  uint64_t window_end_ns = 0;
};

struct NatEstimate {
  Ipv4 src_addr = 0;
  uint32_t distinct_hostids = 0;
  double estimate = 0;  // >= distinct_hostids
  uint64_t window_start_ns = 0;
  uint64_t window_end_ns = 0;
};

enum class FaultSite : uint8_t {
  LocalLan,
  AccessLink,
  Provider,
  RemoteNetwork,
  Healthy,
};

const char* to_string(FaultSite site);

// What a CPE-positioned observer knows when localizing a reachability
// problem. Optional fields mean "no data".
struct CpeView {
  bool outbound_lhb_seen = false;
  bool outbound_ihb_seen = false;
  std::optional<double> inbound_global_p_consistent;
  std::optional<double> inbound_target_prefix_p_consistent;
  std::optional<bool> provider_lhb_seen;
};

struct FaultLocalization {
  FaultSite verdict = FaultSite::Healthy;
  std::string evidence;
};

// Everything one analysis pass produces over a trace; the simulator scores
// it against ground truth.
struct ReportBundle {
  std::string run_id;
  std::vector<OutageAssessment> assessments;  // every checkpoint, every /24
  std::vector<PathChangeEvent> path_events;   // incl. shared-fate groups
  std::vector<SpoofAlert> spoof_alerts;
  std::vector<AliasCandidateSet> alias_sets;  // every alias window
  std::vector<NatEstimate> nat_estimates;
};

// ---------------------------------------------------------------------------
// Analytics parameters (defaults are the documented operating point)
// ---------------------------------------------------------------------------

struct Params {
  unsigned lens_mask = 8;
  double outage_threshold = 0.05;
  double path_window_s = 300;
  size_t min_samples = 10;       // arrivals required per analyzed window
  double lb_mass = 0.25;         // share that keeps a hop value "alive"
  int lb_min_windows = 3;        // balanced windows needed for LoadBalanced
  double shared_fate_tau_s = 60;
  int spoof_margin = 3;
  double alias_window_s = 1800;
  double nat_id_space = 65536;
};

// ---------------------------------------------------------------------------
// Inference over observer state (pure; operate on snapshots)
// ---------------------------------------------------------------------------

// Each member's silence consistency is a p-value, so the joint product of
// k healthy members is not uniform; a flat cut would false-alarm more the
// more hosts participate. This solves P(product of k uniforms < t) = base
// exactly, keeping the per-/24 false-alarm budget at `base` for any k.
// k = 1 returns base unchanged.
double joint_outage_threshold(double base, unsigned members);

// Joint reachability of one /24 given every known participant's silence:
// the product of member consistencies against the calibrated threshold.
// All states must share the target /24; throws on an empty set.
OutageAssessment outage_assessment(std::span<const SourceState* const> states,
                                   uint64_t now_ns, unsigned lens_mask,
                                   double threshold = 0.05);

// Windowed modal-hop analysis of one source: route changes (the mode moves
// and the old mode dies out) and load balancing (several hop values stay
// alive within the same windows). Windows with fewer than min_samples
// arrivals are ignored.
std::vector<PathChangeEvent> detect_path_events(const SourceState& state,
                                                const Params& params);

// Groups RouteChange events whose onsets fall within tau of each other and
// whose hop deltas agree in sign. Groups of one are not fate-sharing and
// are dropped.
std::vector<PathChangeEvent> correlate_shared_fate(
    std::span<const PathChangeEvent> events, double tau_s);

// Batch spoof scan over one source's history. An arrival is flagged when
// its hop count undercuts the running minimum of unflagged history by more
// than the margin and no detected RouteChange explains the new distance.
// Flagged arrivals do not lower the legitimate minimum, so a sustained
// forgery stream is flagged in full. MetaConflict is attached when the
// observer counted rate conflicts or duplicate sequences for this source.
std::vector<SpoofAlert> detect_spoofs(
    const SourceState& state, const Params& params,
    std::span<const PathChangeEvent> route_events);

// Streaming form for a single new arrival, judged against the state's
// aggregates (which must not yet include the arrival).
std::optional<SpoofAlert> detect_spoof(
    const SourceState& state, const wire::ObservedHeartbeat& obs,
    const Params& params, std::span<const PathChangeEvent> route_events);

// Clusters source addresses that were active with the same HostID inside
// the window. A set is promoted to RotationConfirmed when the same address
// group appears in `prior` under a different HostID: surviving a rotation
// is strong alias evidence, while random HostID collisions dissolve.
std::vector<AliasCandidateSet> alias_candidates(
    const observer::Snapshot& snap, uint64_t window_start_ns,
    uint64_t window_end_ns, std::span<const AliasCandidateSet> prior = {});

// One estimate per source address showing >= 2 distinct HostIDs in the
// window.
std::vector<NatEstimate> nat_estimates(const observer::Snapshot& snap,
                                       uint64_t window_start_ns,
                                       uint64_t window_end_ns,
                                       double id_space = 65536.0);

// Decision table over the CPE view; `threshold` separates silent from
// healthy consistency values.
FaultLocalization localize_fault(const CpeView& view, double threshold = 0.05);

}  // namespace ihb::inference
