#include "ihb/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace ihb::inference {

double silence_consistency(uint32_t rate_uhz, unsigned lens_mask,
                           double silence_s) {
  if (lens_mask > 24) {
    throw std::invalid_argument("lens mask must be <= 24 for outage math");
  }
  if (silence_s < 0) throw std::invalid_argument("silence must be >= 0");
  const double opportunities =
      std::floor(static_cast<double>(rate_uhz) * silence_s / 1e6);
  const double miss = 1.0 - std::exp2(-static_cast<double>(lens_mask));
  return std::pow(miss, opportunities);
}

double silence_consistency_poisson(uint32_t rate_uhz, unsigned lens_mask,
                                   double silence_s) {
  if (lens_mask > 24) {
    throw std::invalid_argument("lens mask must be <= 24 for outage math");
  }
  if (silence_s < 0) throw std::invalid_argument("silence must be >= 0");
  const double lambda = static_cast<double>(rate_uhz) / 1e6 * silence_s *
                        std::exp2(-static_cast<double>(lens_mask));
  return std::exp(-lambda);
}

double expected_arrival_rate(double participants, double rate_pps,
                             unsigned lens_mask) {
  if (participants < 0 || rate_pps < 0) {
    throw std::invalid_argument("participants and rate must be >= 0");
  }
  if (lens_mask > 32) throw std::invalid_argument("lens mask must be <= 32");
  return participants * rate_pps * std::exp2(-static_cast<double>(lens_mask));
}

double expected_interprobe_hits(unsigned lens_mask) {
  if (lens_mask > 24) throw std::invalid_argument("lens mask must be <= 24");
  return std::exp2(static_cast<double>(lens_mask)) / 2.0;
}

double median_interprobe_hits(unsigned lens_mask) {
  if (lens_mask > 24) throw std::invalid_argument("lens mask must be <= 24");
  return std::exp2(static_cast<double>(lens_mask)) * std::log(2.0);
}

HopCount hop_count(uint8_t orig_ttl, uint8_t arrival_ttl) {
  const int hops = static_cast<int>(orig_ttl) - static_cast<int>(arrival_ttl);
  return HopCount{hops, hops < 0};
}

double nat_estimate_count(double distinct, double id_space) {
  if (distinct < 0 || id_space < 2) {
    throw std::invalid_argument("need 0 <= distinct and id_space >= 2");
  }
  if (distinct >= id_space) {
    throw std::invalid_argument("distinct ids saturate the id space");
  }
  if (distinct == 0) return 0.0;
  return std::log(1.0 - distinct / id_space) / std::log(1.0 - 1.0 / id_space);
}

const char* to_string(FaultSite site) {
  switch (site) {
    case FaultSite::LocalLan:
      return "local_lan";
    case FaultSite::AccessLink:
      return "access_link";
    case FaultSite::Provider:
      return "provider";
    case FaultSite::RemoteNetwork:
      return "remote_network";
    case FaultSite::Healthy:
      return "healthy";
  }
  return "unknown";
}

double joint_outage_threshold(double base, unsigned members) {
  if (base <= 0 || base >= 1) {
    throw std::invalid_argument("base threshold must be in (0, 1)");
  }
  if (members <= 1) return base;
  // P(prod of k uniforms < t) = t * sum_{j<k} (-ln t)^j / j!, increasing
  // in t; bisect for the t that makes it equal base.
  const auto tail = [members](double t) {
    const double l = -std::log(t);
    double term = 1.0, sum = 1.0;
    for (unsigned j = 1; j < members; ++j) {
      term *= l / j;
      sum += term;
    }
    return t * sum;
  };
  double lo = 1e-300, hi = base;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);  // bisect in log space
    (tail(mid) < base ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

OutageAssessment outage_assessment(std::span<const SourceState* const> states,
                                   uint64_t now_ns, unsigned lens_mask,
                                   double threshold) {
  if (states.empty()) {
    throw std::invalid_argument("outage assessment over an empty host set");
  }
  const Prefix target = slash24_of(states.front()->key.src_addr);
  OutageAssessment out;
  out.target = target;
  out.now_ns = now_ns;
  out.threshold =
      joint_outage_threshold(threshold, static_cast<unsigned>(states.size()));
  out.member_count = static_cast<uint32_t>(states.size());
  double min_silence = -1;
  double p = 1.0;
  for (const SourceState* st : states) {
    if (!(slash24_of(st->key.src_addr) == target)) {
      throw std::invalid_argument("hosts must share the assessed /24");
    }
    const double silence =
        st->last_seen_ns >= now_ns
            ? 0.0
            : static_cast<double>(now_ns - st->last_seen_ns) / 1e9;
    if (min_silence < 0 || silence < min_silence) min_silence = silence;
    p *= silence_consistency(st->declared_rate_uhz, lens_mask, silence);
  }
  out.silence_s = min_silence;
  out.p_consistent = p;
  out.verdict = p < out.threshold ? OutageVerdict::SuspectedOutage
                                  : OutageVerdict::Reachable;
  return out;
}

namespace {

struct WindowStats {
  int64_t index = 0;
  uint64_t start_ns = 0;
  std::map<int, size_t> hop_hist;
  size_t total = 0;

  int mode() const {
    int best = 0;
    size_t best_n = 0;
    for (const auto& [hops, n] : hop_hist) {
      if (n > best_n) {  // ties resolve to the smaller hop count
        best_n = n;
        best = hops;
      }
    }
    return best;
  }
  double mass(int hops) const {
    auto it = hop_hist.find(hops);
    if (it == hop_hist.end() || total == 0) return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(total);
  }
};

std::vector<WindowStats> windowed_hops(const SourceState& state,
                                       const Params& params) {
  const auto window_ns = static_cast<uint64_t>(params.path_window_s * 1e9);
  std::vector<WindowStats> windows;
  for (const auto& a : state.history) {
    const int64_t idx = static_cast<int64_t>(a.recv_time_ns / window_ns);
    if (windows.empty() || windows.back().index != idx) {
      WindowStats w;
      w.index = idx;
      w.start_ns = static_cast<uint64_t>(idx) * window_ns;
      windows.push_back(w);
    }
    windows.back().hop_hist[a.hop_count()]++;
    windows.back().total++;
  }
  // Only windows with enough arrivals support a modal claim.
  std::erase_if(windows,
                [&](const WindowStats& w) { return w.total < params.min_samples; });
  return windows;
}

}  // namespace

std::vector<PathChangeEvent> detect_path_events(const SourceState& state,
                                                const Params& params) {
  std::vector<PathChangeEvent> events;
  const auto windows = windowed_hops(state, params);
  if (windows.size() < 2) return events;

  // Route changes: the mode moves, sticks for two windows, and the old
  // mode drops below the load-balance mass (i.e. the old path actually
  // went away rather than coexisting).
  for (size_t i = 1; i + 1 < windows.size(); ++i) {
    const int prev_mode = windows[i - 1].mode();
    const int cur_mode = windows[i].mode();
    if (cur_mode == prev_mode) continue;
    if (windows[i + 1].mode() != cur_mode) continue;
    if (windows[i].mass(prev_mode) >= params.lb_mass) continue;
    if (windows[i + 1].mass(prev_mode) >= params.lb_mass) continue;
    if (windows[i - 1].mass(cur_mode) >= params.lb_mass) continue;
    PathChangeEvent ev;
    ev.kind = PathEventKind::RouteChange;
    ev.key = state.key;
    ev.onset_ns = windows[i].start_ns;
    ev.window_s = params.path_window_s;
    ev.before_mode = prev_mode;
    ev.after_mode = cur_mode;
    ev.delta_sign = cur_mode > prev_mode ? 1 : -1;
    events.push_back(std::move(ev));
  }

  // Load balancing: several hop values each hold a steady share inside the
  // same window, repeatedly.
  size_t balanced_windows = 0;
  uint64_t first_balanced_ns = 0;
  std::map<int, size_t> persistent;  // value -> balanced windows containing it
  std::map<int, size_t> total_hist;
  size_t total_n = 0;
  for (const auto& w : windows) {
    std::vector<int> alive;
    for (const auto& [hops, n] : w.hop_hist) {
      if (static_cast<double>(n) / static_cast<double>(w.total) >=
          params.lb_mass) {
        alive.push_back(hops);
      }
    }
    if (alive.size() >= 2) {
      if (balanced_windows == 0) first_balanced_ns = w.start_ns;
      balanced_windows++;
      for (int hops : alive) persistent[hops]++;
    }
    for (const auto& [hops, n] : w.hop_hist) total_hist[hops] += n;
    total_n += w.total;
  }
  if (balanced_windows >= static_cast<size_t>(params.lb_min_windows)) {
    PathChangeEvent ev;
    ev.kind = PathEventKind::LoadBalanced;
    ev.key = state.key;
    ev.onset_ns = first_balanced_ns;
    ev.window_s = params.path_window_s;
    for (const auto& [hops, windows_alive] : persistent) {
      if (windows_alive >= static_cast<size_t>(params.lb_min_windows)) {
        ev.modes.emplace_back(
            hops, static_cast<double>(total_hist[hops]) /
                      static_cast<double>(total_n));
      }
    }
    if (ev.modes.size() >= 2) events.push_back(std::move(ev));
  }

  return events;
}

std::vector<PathChangeEvent> correlate_shared_fate(
    std::span<const PathChangeEvent> events, double tau_s) {
  std::vector<const PathChangeEvent*> changes;
  for (const auto& e : events) {
    if (e.kind == PathEventKind::RouteChange) changes.push_back(&e);
  }
  std::sort(changes.begin(), changes.end(),
            [](const PathChangeEvent* a, const PathChangeEvent* b) {
              if (a->onset_ns != b->onset_ns) return a->onset_ns < b->onset_ns;
              return a->key < b->key;
            });

  const auto tau_ns = static_cast<uint64_t>(tau_s * 1e9);
  std::vector<PathChangeEvent> groups;
  // One open cluster per delta sign; onset proximity is measured against
  // the cluster's first member.
  struct Open {
    uint64_t first_onset = 0;
    std::set<SourceKey> members;
  };
  std::map<int, Open> open;
  auto close = [&](int sign, Open& o) {
    if (o.members.size() >= 2) {
      PathChangeEvent g;
      g.kind = PathEventKind::SharedFateGroup;
      g.onset_ns = o.first_onset;
      g.delta_sign = sign;
      g.members.assign(o.members.begin(), o.members.end());
      groups.push_back(std::move(g));
    }
    o = Open{};
  };
  for (const PathChangeEvent* e : changes) {
    Open& o = open[e->delta_sign];
    if (!o.members.empty() && e->onset_ns - o.first_onset > tau_ns) {
      close(e->delta_sign, o);
    }
    if (o.members.empty()) o.first_onset = e->onset_ns;
    o.members.insert(e->key);
  }
  for (auto& [sign, o] : open) close(sign, o);
  std::sort(groups.begin(), groups.end(),
            [](const PathChangeEvent& a, const PathChangeEvent& b) {
              return a.onset_ns < b.onset_ns;
            });
  return groups;
}

namespace {

bool covered_by_route_change(uint64_t recv_ns, int hops, int margin,
                             const SourceKey& key,
                             std::span<const PathChangeEvent> route_events) {
  for (const auto& e : route_events) {
    if (e.kind != PathEventKind::RouteChange) continue;
    if (!(e.key == key)) continue;
    if (recv_ns < e.onset_ns) continue;
    if (std::abs(e.after_mode - hops) <= margin) return true;
  }
  return false;
}

}  // namespace

std::vector<SpoofAlert> detect_spoofs(
    const SourceState& state, const Params& params,
    std::span<const PathChangeEvent> route_events) {
  std::vector<SpoofAlert> alerts;

  int legit_min = 0;
  bool have_min = false;
  size_t legit_seen = 0;
  for (const auto& a : state.history) {
    const int hops = a.hop_count();
    if (have_min && legit_seen >= params.min_samples &&
        hops < legit_min - params.spoof_margin &&
        !covered_by_route_change(a.recv_time_ns, hops, params.spoof_margin,
                                 state.key, route_events)) {
      SpoofAlert alert;
      alert.evidence = SpoofEvidence::HopCountShrunk;
      alert.key = state.key;
      alert.recv_time_ns = a.recv_time_ns;
      alert.seq = a.seq;
      alert.observed_hops = hops;
      alert.historical_min = legit_min;
      alert.detail = "hop count " + std::to_string(hops) + " below minimum " +
                     std::to_string(legit_min) + " - margin";
      alerts.push_back(std::move(alert));
      continue;  // forged arrivals must not drag the minimum down
    }
    legit_min = have_min ? std::min(legit_min, hops) : hops;
    have_min = true;
    legit_seen++;
  }

  if (state.rate_conflicts > 0 || state.duplicate_seqs > 0) {
    SpoofAlert alert;
    alert.evidence = SpoofEvidence::MetaConflict;
    alert.key = state.key;
    alert.recv_time_ns = state.last_seen_ns;
    alert.observed_hops = 0;
    alert.historical_min = have_min ? legit_min : 0;
    alert.detail = "rate_conflicts=" + std::to_string(state.rate_conflicts) +
                   " duplicate_seqs=" + std::to_string(state.duplicate_seqs);
    alerts.push_back(std::move(alert));
  }
  return alerts;
}

std::optional<SpoofAlert> detect_spoof(
    const SourceState& state, const wire::ObservedHeartbeat& obs,
    const Params& params, std::span<const PathChangeEvent> route_events) {
  if (state.total_arrivals() < params.min_samples) return std::nullopt;
  const int hops = hop_count(obs.body.orig_ttl, obs.arrival_ttl).hops;
  if (hops >= state.hop_min - params.spoof_margin) return std::nullopt;
  if (covered_by_route_change(obs.recv_time_ns, hops, params.spoof_margin,
                              state.key, route_events)) {
    return std::nullopt;
  }
  SpoofAlert alert;
  alert.evidence = SpoofEvidence::HopCountShrunk;
  alert.key = state.key;
  alert.recv_time_ns = obs.recv_time_ns;
  alert.seq = obs.body.seq;
  alert.observed_hops = hops;
  alert.historical_min = state.hop_min;
  alert.detail = "hop count " + std::to_string(hops) + " below minimum " +
                 std::to_string(state.hop_min) + " - margin";
  return alert;
}

std::vector<AliasCandidateSet> alias_candidates(
    const observer::Snapshot& snap, uint64_t window_start_ns,
    uint64_t window_end_ns, std::span<const AliasCandidateSet> prior) {
  // Active in window: the state's lifetime overlaps it.
  std::map<uint16_t, std::set<Ipv4>> by_id;
  for (const auto& st : snap.states) {
    if (st.first_seen_ns > window_end_ns || st.last_seen_ns < window_start_ns) {
      continue;
    }
    by_id[st.key.host_id].insert(st.key.src_addr);
  }

  std::vector<AliasCandidateSet> out;
  for (const auto& [host_id, addrs] : by_id) {
    if (addrs.size() < 2) continue;
    AliasCandidateSet set;
    set.host_id = host_id;
    set.members.assign(addrs.begin(), addrs.end());
    set.window_start_ns = window_start_ns;
    set.window_end_ns = window_end_ns;
    for (const auto& p : prior) {
      if (p.host_id != host_id && p.members == set.members) {
        // Same address group under a fresh HostID: survived a rotation.
        set.tier = AliasTier::RotationConfirmed;
        break;
      }
    }
    out.push_back(std::move(set));
  }
  return out;
}

std::vector<NatEstimate> nat_estimates(const observer::Snapshot& snap,
                                       uint64_t window_start_ns,
                                       uint64_t window_end_ns,
                                       double id_space) {
  std::map<Ipv4, std::set<uint16_t>> by_addr;
  for (const auto& st : snap.states) {
    if (st.first_seen_ns > window_end_ns || st.last_seen_ns < window_start_ns) {
      continue;
    }
    by_addr[st.key.src_addr].insert(st.key.host_id);
  }
  std::vector<NatEstimate> out;
  for (const auto& [addr, ids] : by_addr) {
    if (ids.size() < 2) continue;
    NatEstimate est;
    est.src_addr = addr;
    est.distinct_hostids = static_cast<uint32_t>(ids.size());
    est.estimate =
        nat_estimate_count(static_cast<double>(ids.size()), id_space);
    est.window_start_ns = window_start_ns;
    est.window_end_ns = window_end_ns;
    out.push_back(est);
  }
  return out;
}

FaultLocalization localize_fault(const CpeView& view, double threshold) {
  FaultLocalization out;
  if (!view.outbound_lhb_seen && !view.outbound_ihb_seen) {
    out.verdict = FaultSite::LocalLan;
    out.evidence = "no outbound heartbeats reach the gateway";
    return out;
  }
  if (view.inbound_global_p_consistent &&
      *view.inbound_global_p_consistent < threshold) {
    if (view.provider_lhb_seen && !*view.provider_lhb_seen) {
      out.verdict = FaultSite::Provider;
      out.evidence = "global inbound silence and provider-subnet LHBs silent";
    } else {
      out.verdict = FaultSite::AccessLink;
      out.evidence = "global inbound silence inconsistent with reachability";
    }
    return out;
  }
  if (view.inbound_target_prefix_p_consistent &&
      *view.inbound_target_prefix_p_consistent < threshold) {
    out.verdict = FaultSite::RemoteNetwork;
    out.evidence = "global inbound healthy; target prefix silent";
    return out;
  }
  out.verdict = FaultSite::Healthy;
  out.evidence = "outbound present and inbound within expectation";
  return out;
}

}  // namespace ihb::inference
