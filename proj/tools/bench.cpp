// Times the batch kernels in both execution modes and reports speedups.
// The serial mode is the reference implementation; outputs are checked to
// match before any timing is trusted.

#include <chrono>
#include <cstdio>

#include "ihb/analysis.hpp"
#include "ihb/parallel.hpp"
#include "ihb/simulator.hpp"

using namespace ihb;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

simulator::Scenario bench_scenario(size_t hosts, double duration_s) {
  simulator::Scenario sc;
  sc.duration_s = duration_s;
  sc.lens = *parse_prefix("10.0.0.0/8");
  sc.seed = 42;
  for (size_t i = 0; i < hosts; ++i) {
    simulator::HostSpec h;
    h.addresses = {*parse_ipv4("198.51.100.1") + static_cast<Ipv4>(i * 7)};
    h.host_id.initial = static_cast<uint16_t>(0x1000 + i);
    h.rate_uhz = 20000000;  // 20 pps
    h.order = schedule::OrderSpec::pure_random(900 + i);
    h.path = {{0, static_cast<int>(8 + i % 6)}};
    sc.hosts.push_back(h);
  }
  return sc;
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e100;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", hardware_threads());

  // --- snapshot sweep kernels ---
  const auto sc = bench_scenario(256, 6000);
  const auto result = simulator::run(sc);
  std::printf("scenario: %zu hosts, %zu arrivals in lens\n", sc.hosts.size(),
              result.trace.size());

  observer::StoreConfig store_cfg;
  store_cfg.lens = sc.lens;
  store_cfg.ring_capacity = 4096;
  observer::StateStore store(store_cfg);
  for (const auto& obs : result.trace) store.ingest(obs);
  const auto snap = store.snapshot();

  inference::Params params;
  params.lens_mask = sc.lens.mask_len;
  params.path_window_s = 200;

  const auto serial_assess = analysis::assess_outages(
      snap, result.trace.back().recv_time_ns, params, Exec::Serial);
  const auto parallel_assess = analysis::assess_outages(
      snap, result.trace.back().recv_time_ns, params, Exec::Parallel);
  const auto serial_paths =
      analysis::detect_all_path_events(snap, params, Exec::Serial);
  const auto parallel_paths =
      analysis::detect_all_path_events(snap, params, Exec::Parallel);
  if (serial_assess.size() != parallel_assess.size() ||
      serial_paths.size() != parallel_paths.size()) {
    std::fprintf(stderr, "serial/parallel outputs disagree; not timing\n");
    return 1;
  }

  struct Row {
    const char* name;
    double serial_s;
    double parallel_s;
  };
  std::vector<Row> rows;

  rows.push_back({"assess_outages",
                  time_best_of(5,
                               [&] {
                                 analysis::assess_outages(
                                     snap, result.trace.back().recv_time_ns,
                                     params, Exec::Serial);
                               }),
                  time_best_of(5, [&] {
                    analysis::assess_outages(snap,
                                             result.trace.back().recv_time_ns,
                                             params, Exec::Parallel);
                  })});

  rows.push_back({"detect_all_path_events",
                  time_best_of(5,
                               [&] {
                                 analysis::detect_all_path_events(
                                     snap, params, Exec::Serial);
                               }),
                  time_best_of(5, [&] {
                    analysis::detect_all_path_events(snap, params,
                                                     Exec::Parallel);
                  })});

  rows.push_back(
      {"detect_all_spoofs",
       time_best_of(5,
                    [&] {
                      analysis::detect_all_spoofs(snap, params, serial_paths,
                                                  Exec::Serial);
                    }),
       time_best_of(5, [&] {
         analysis::detect_all_spoofs(snap, params, serial_paths,
                                     Exec::Parallel);
       })});

  // --- multi-seed batch ---
  analysis::PipelineConfig pipeline;
  pipeline.params = params;
  pipeline.assessment_interval_s = 300;
  auto seed_sc = bench_scenario(8, 3000);
  std::vector<uint64_t> seeds;
  for (uint64_t s = 1; s <= 16; ++s) seeds.push_back(s);

  const auto serial_seeds =
      analysis::run_seeds(seed_sc, seeds, pipeline, Exec::Serial);
  const auto parallel_seeds =
      analysis::run_seeds(seed_sc, seeds, pipeline, Exec::Parallel);
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (serial_seeds[i].run_id != parallel_seeds[i].run_id ||
        serial_seeds[i].trace_arrivals != parallel_seeds[i].trace_arrivals) {
      std::fprintf(stderr, "seed batch outputs disagree; not timing\n");
      return 1;
    }
  }
  rows.push_back(
      {"run_seeds (16 seeds)",
       time_best_of(2,
                    [&] {
                      analysis::run_seeds(seed_sc, seeds, pipeline,
                                          Exec::Serial);
                    }),
       time_best_of(2, [&] {
         analysis::run_seeds(seed_sc, seeds, pipeline, Exec::Parallel);
       })});

  std::printf("\n%-26s %12s %12s %9s\n", "kernel", "serial (s)", "parallel (s)",
              "speedup");
  for (const auto& r : rows) {
    std::printf("%-26s %12.4f %12.4f %8.2fx\n", r.name, r.serial_s,
                r.parallel_s, r.serial_s / r.parallel_s);
  }
  return 0;
}
