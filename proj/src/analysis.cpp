#include "ihb/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace ihb::analysis {

std::vector<inference::OutageAssessment> assess_outages(
    const observer::Snapshot& snap, uint64_t now_ns,
    const inference::Params& params, Exec exec) {
  // A key whose address later reappeared under a different HostID was
  // rotated away, not silenced; keeping it would read every rotation as a
  // permanent outage of that member. States sharing an address are
  // contiguous in the sorted snapshot.
  std::vector<bool> keep(snap.states.size(), true);
  for (size_t run = 0; run < snap.states.size();) {
    size_t end = run;
    while (end < snap.states.size() &&
           snap.states[end].key.src_addr == snap.states[run].key.src_addr) {
      end++;
    }
    for (size_t i = run; i < end; ++i) {
      for (size_t j = run; j < end && keep[i]; ++j) {
        if (j != i &&
            snap.states[j].first_seen_ns > snap.states[i].last_seen_ns) {
          keep[i] = false;
        }
      }
    }
    run = end;
  }

  // Snapshot states are sorted by key, so /24 groups are contiguous.
  std::vector<std::vector<const observer::SourceState*>> groups;
  for (size_t i = 0; i < snap.states.size(); ++i) {
    if (!keep[i]) continue;
    const auto& st = snap.states[i];
    if (!groups.empty() &&
        slash24_index(groups.back().front()->key.src_addr) ==
            slash24_index(st.key.src_addr)) {
      groups.back().push_back(&st);
    } else {
      groups.push_back({&st});
    }
  }
  std::vector<inference::OutageAssessment> out(groups.size());
  par_for(groups.size(), exec, [&](size_t i) {
    out[i] = inference::outage_assessment(groups[i], now_ns, params.lens_mask,
                                          params.outage_threshold);
  });
  return out;
}

std::vector<inference::PathChangeEvent> detect_all_path_events(
    const observer::Snapshot& snap, const inference::Params& params,
    Exec exec) {
  std::vector<std::vector<inference::PathChangeEvent>> per_state(
      snap.states.size());
  par_for(snap.states.size(), exec, [&](size_t i) {
    per_state[i] = inference::detect_path_events(snap.states[i], params);
  });
  std::vector<inference::PathChangeEvent> out;
  for (auto& events : per_state) {
    for (auto& e : events) out.push_back(std::move(e));
  }
  return out;
}

std::vector<inference::SpoofAlert> detect_all_spoofs(
    const observer::Snapshot& snap, const inference::Params& params,
    std::span<const inference::PathChangeEvent> route_events, Exec exec) {
  std::vector<std::vector<inference::SpoofAlert>> per_state(
      snap.states.size());
  par_for(snap.states.size(), exec, [&](size_t i) {
    per_state[i] = inference::detect_spoofs(snap.states[i], params,
                                            route_events);
  });
  std::vector<inference::SpoofAlert> out;
  for (auto& alerts : per_state) {
    for (auto& a : alerts) out.push_back(std::move(a));
  }
  return out;
}

inference::ReportBundle run_pipeline(
    std::span<const wire::ObservedHeartbeat> trace, const Prefix& lens,
    const PipelineConfig& cfg, const std::string& run_id, double end_time_s) {
  inference::ReportBundle bundle;
  bundle.run_id = run_id;

  observer::StoreConfig store_cfg;
  store_cfg.lens = lens;
  store_cfg.capacity = cfg.store_capacity;
  store_cfg.ring_capacity = cfg.ring_capacity;
  store_cfg.ttl_jump_threshold = cfg.ttl_jump_threshold;
  store_cfg.pair_window_ns = cfg.pair_window_ns;
  observer::StateStore store(store_cfg);

  if (end_time_s <= 0 && !trace.empty()) {
    end_time_s = static_cast<double>(trace.back().recv_time_ns) / 1e9;
  }
  const auto interval_ns =
      static_cast<uint64_t>(cfg.assessment_interval_s * 1e9);
  const auto end_ns = static_cast<uint64_t>(end_time_s * 1e9);

  // Outage checkpoints interleave with ingestion so each assessment sees
  // exactly the arrivals that existed at its instant. Silence math is
  // defined for lenses up to /24; narrower lenses get every other report
  // but no outage series.
  uint64_t next_checkpoint =
      lens.mask_len <= 24 && interval_ns > 0 ? interval_ns : UINT64_MAX;
  auto emit_checkpoint = [&](uint64_t now) {
    const auto snap = store.snapshot();
    if (snap.states.empty()) return;
    auto assessments = assess_outages(snap, now, cfg.params, cfg.exec);
    for (auto& a : assessments) bundle.assessments.push_back(std::move(a));
  };
  for (const auto& obs : trace) {
    while (interval_ns > 0 && next_checkpoint <= obs.recv_time_ns &&
           next_checkpoint <= end_ns) {
      emit_checkpoint(next_checkpoint);
      next_checkpoint += interval_ns;
    }
    store.ingest(obs);
  }
  while (interval_ns > 0 && next_checkpoint <= end_ns) {
    emit_checkpoint(next_checkpoint);
    next_checkpoint += interval_ns;
  }

  const auto snap = store.snapshot();

  bundle.path_events = detect_all_path_events(snap, cfg.params, cfg.exec);
  auto groups =
      inference::correlate_shared_fate(bundle.path_events,
                                       cfg.params.shared_fate_tau_s);
  bundle.spoof_alerts =
      detect_all_spoofs(snap, cfg.params, bundle.path_events, cfg.exec);
  for (auto& g : groups) bundle.path_events.push_back(std::move(g));

  // Alias windows chain across the run so rotation survivors get promoted.
  const auto alias_window_ns =
      static_cast<uint64_t>(cfg.params.alias_window_s * 1e9);
  std::vector<inference::AliasCandidateSet> prior;
  if (alias_window_ns > 0) {
    for (uint64_t start = 0; start < end_ns; start += alias_window_ns) {
      const uint64_t end = std::min(end_ns, start + alias_window_ns);
      auto sets = inference::alias_candidates(snap, start, end, prior);
      prior = sets;
      for (auto& s : sets) bundle.alias_sets.push_back(std::move(s));
    }
  }

  // NAT estimation over the final alias window, not the whole run: a
  // window longer than the rotation period would read every rotating host
  // as a NAT of two. The guard band keeps arrivals still in flight at the
  // window edge from re-admitting a pre-rotation state.
  uint64_t nat_start = 0;
  if (alias_window_ns > 0 && end_ns > alias_window_ns) {
    const auto guard_ns = static_cast<uint64_t>(
        std::min(60.0, cfg.params.alias_window_s / 4) * 1e9);
    nat_start = end_ns - alias_window_ns + guard_ns;
  }
  bundle.nat_estimates = inference::nat_estimates(snap, nat_start, end_ns,
                                                  cfg.params.nat_id_space);
  return bundle;
}

std::vector<SeedOutcome> run_seeds(const simulator::Scenario& base,
                                   std::span<const uint64_t> seeds,
                                   const PipelineConfig& cfg, Exec exec) {
  // Seeds cannot change validity, so reject bad scenarios before the
  // parallel region; an exception inside it would not propagate.
  const auto problems = simulator::validate(base);
  if (!problems.empty()) {
    std::string what = "invalid scenario:";
    for (const auto& p : problems) what += "\n  " + p;
    throw simulator::ScenarioError(what);
  }

  std::vector<SeedOutcome> out(seeds.size());
  PipelineConfig seed_cfg = cfg;
  seed_cfg.exec = Exec::Serial;  // parallelism lives at the seed level here
  par_for(seeds.size(), exec, [&](size_t i) {
    simulator::Scenario sc = base;
    sc.seed = seeds[i];
    const auto result = simulator::run(sc);
    const auto bundle =
        run_pipeline(result.trace, sc.lens, seed_cfg, result.run_id,
                     sc.duration_s);
    SeedOutcome& o = out[i];
    o.seed = seeds[i];
    o.run_id = result.run_id;
    o.trace_arrivals = result.trace.size();
    o.metrics =
        simulator::evaluate(result.trace, result.truth, bundle,
                            seed_cfg.params);
  });
  return out;
}

}  // namespace ihb::analysis
