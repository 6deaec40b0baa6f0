#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ihb/inference.hpp"
#include "ihb/observer.hpp"
#include "ihb/parallel.hpp"
#include "ihb/simulator.hpp"

// Batch analytics over traces and snapshots. The per-source and per-seed
// sweeps are the data-parallel kernels of the toolkit: each has an OpenMP
// variant selected with Exec::Parallel and a serial reference path used by
// the tests as ground truth and by the bench tool for comparison. Outputs
// are ordered deterministically regardless of mode.
namespace ihb::analysis {

struct PipelineConfig {
  inference::Params params;
  double assessment_interval_s = 300;  // outage checkpoints cadence
  size_t store_capacity = 1u << 20;
  size_t ring_capacity = 4096;
  int ttl_jump_threshold = 3;
  uint64_t pair_window_ns = 100'000'000;
  Exec exec = Exec::Serial;
};

// Outage assessments for every /24 with known participants, at one instant.
std::vector<inference::OutageAssessment> assess_outages(
    const observer::Snapshot& snap, uint64_t now_ns,
    const inference::Params& params, Exec exec = Exec::Serial);

// Path events for every source in the snapshot.
std::vector<inference::PathChangeEvent> detect_all_path_events(
    const observer::Snapshot& snap, const inference::Params& params,
    Exec exec = Exec::Serial);

// Spoof scan for every source, given the detected route-change context.
std::vector<inference::SpoofAlert> detect_all_spoofs(
    const observer::Snapshot& snap, const inference::Params& params,
    std::span<const inference::PathChangeEvent> route_events,
    Exec exec = Exec::Serial);

// Full pass over a trace: stream it through a StateStore, assess outages
// at every checkpoint, then run the path/spoof/alias/NAT analytics on the
// final state. end_time_s bounds the checkpoint grid (use the scenario
// duration; defaults to the last arrival).
inference::ReportBundle run_pipeline(
    std::span<const wire::ObservedHeartbeat> trace, const Prefix& lens,
    const PipelineConfig& cfg, const std::string& run_id = "",
    double end_time_s = 0);

// One scenario, many seeds; embarrassingly parallel across seeds, and the
// per-seed work stays serial so results are mode-independent.
struct SeedOutcome {
  uint64_t seed = 0;
  std::string run_id;
  simulator::Metrics metrics;
  uint64_t trace_arrivals = 0;
};

std::vector<SeedOutcome> run_seeds(const simulator::Scenario& base,
                                   std::span<const uint64_t> seeds,
                                   const PipelineConfig& cfg,
                                   Exec exec = Exec::Serial);

}  // namespace ihb::analysis
