// ihb: operator CLI for the heartbeat toolkit. Machine-readable output
// (JSON / JSONL) goes to stdout or files; human summaries go to stderr.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ihb/analysis.hpp"
#include "ihb/config.hpp"
#include "ihb/emitters.hpp"
#include "ihb/observer.hpp"
#include "ihb/pcap.hpp"
#include "ihb/records.hpp"
#include "ihb/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ihb;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

uint64_t parse_u64_flag(const std::string& s) {
  return std::stoull(s, nullptr, 0);
}

// ---------------------------------------------------------------------------
// model: closed-form calculators
// ---------------------------------------------------------------------------

struct ModelOptions {
  double rate_pps = 1.0;
  unsigned lens_mask = 8;
  double silence_s = 0;
  bool poisson = false;
  double participants = 0;
  std::string pool = "full_v4";
  uint64_t senders = 1;
  std::string order = "permutation";
};

int run_model_outage(const ModelOptions& opt) {
  const auto rate_uhz = static_cast<uint32_t>(opt.rate_pps * 1e6 + 0.5);
  const double p =
      opt.poisson
          ? inference::silence_consistency_poisson(rate_uhz, opt.lens_mask,
                                                   opt.silence_s)
          : inference::silence_consistency(rate_uhz, opt.lens_mask,
                                           opt.silence_s);
  std::cout << json{{"model", "outage"},
                    {"rate_pps", opt.rate_pps},
                    {"lens_mask", opt.lens_mask},
                    {"silence_s", opt.silence_s},
                    {"form", opt.poisson ? "poisson" : "bernoulli"},
                    {"p_consistent", p}}
                   .dump()
            << "\n";
  return 0;
}

int run_model_rate(const ModelOptions& opt) {
  const double a = inference::expected_arrival_rate(opt.participants,
                                                    opt.rate_pps, opt.lens_mask);
  std::cout << json{{"model", "rate"},
                    {"participants", opt.participants},
                    {"rate_pps", opt.rate_pps},
                    {"lens_mask", opt.lens_mask},
                    {"arrival_pps", a}}
                   .dump()
            << "\n";
  return 0;
}

int run_model_coverage(const ModelOptions& opt) {
  uint64_t pool_size;
  if (opt.pool == "full_v4") pool_size = uint64_t{1} << 32;
  else if (opt.pool == "per24") pool_size = uint64_t{1} << 24;
  else pool_size = parse_u64_flag(opt.pool);
  const auto order = opt.order == "random" ? wire::OrderKind::Random
                                           : wire::OrderKind::Permutation;
  const double per_sender =
      schedule::coverage_estimate(pool_size, opt.senders, order);
  std::cout << json{{"model", "coverage"},
                    {"pool_size", pool_size},
                    {"senders", opt.senders},
                    {"order", opt.order},
                    {"per_sender", per_sender},
                    {"all_pairs_total",
                     schedule::u128_to_string(
                         schedule::all_pairs_total(pool_size))}}
                   .dump()
            << "\n";
  return 0;
}

int run_model_interprobe(const ModelOptions& opt) {
  std::cout << json{{"model", "interprobe"},
                    {"lens_mask", opt.lens_mask},
                    {"mean_half_range",
                     inference::expected_interprobe_hits(opt.lens_mask)},
                    {"median_geometric",
                     inference::median_interprobe_hits(opt.lens_mask)}}
                   .dump()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::string scenario_path;
  uint64_t seed = 0;
  bool seed_set = false;
  unsigned seeds = 1;
  std::string out_dir;
  bool write_pcap = false;
  bool parallel = false;
};

json truth_meta(const simulator::RunResult& result,
                const simulator::Scenario& sc) {
  return json{{"type", "meta"},
              {"kind", "truth"},
              {"schema", records::kSchemaVersion},
              {"run_id", result.run_id},
              {"seed", sc.seed},
              {"duration_s", sc.duration_s},
              {"lens", format_prefix(sc.lens)},
              {"scenario", simulator::scenario_to_json(sc)}};
}

void write_reports(const inference::ReportBundle& bundle,
                   const std::string& path, const std::string& selector) {
  records::JsonlWriter out(path);
  auto want = [&](const char* kind) {
    return selector == "all" || selector == kind;
  };
  if (want("outage")) {
    for (const auto& r : bundle.assessments) {
      out.write(records::report_to_json(r));
    }
  }
  if (want("paths")) {
    for (const auto& r : bundle.path_events) {
      out.write(records::report_to_json(r));
    }
  }
  if (want("spoof")) {
    for (const auto& r : bundle.spoof_alerts) {
      out.write(records::report_to_json(r));
    }
  }
  if (want("alias")) {
    for (const auto& r : bundle.alias_sets) {
      out.write(records::report_to_json(r));
    }
  }
  if (want("nat")) {
    for (const auto& r : bundle.nat_estimates) {
      out.write(records::report_to_json(r));
    }
  }
}

int run_simulate(const SimulateOptions& opt,
                 const analysis::PipelineConfig& pipeline_base) {
  std::ifstream in(opt.scenario_path);
  if (!in) {
    std::cerr << "cannot open scenario: " << opt.scenario_path << "\n";
    return 1;
  }
  json sj = json::parse(in, nullptr, false);
  if (sj.is_discarded()) {
    std::cerr << "scenario is not valid json\n";
    return 1;
  }
  simulator::Scenario sc = simulator::scenario_from_json(sj);
  if (opt.seed_set) sc.seed = opt.seed;

  fs::create_directories(opt.out_dir);
  analysis::PipelineConfig pipeline = pipeline_base;
  pipeline.params.lens_mask = sc.lens.mask_len;

  if (opt.seeds > 1) {
    std::vector<uint64_t> seeds;
    for (unsigned i = 0; i < opt.seeds; ++i) seeds.push_back(sc.seed + i);
    const auto outcomes = analysis::run_seeds(
        sc, seeds, pipeline, opt.parallel ? Exec::Parallel : Exec::Serial);
    records::JsonlWriter out(opt.out_dir + "/metrics.jsonl");
    for (const auto& o : outcomes) {
      json j = simulator::metrics_to_json(o.metrics);
      j["seed"] = o.seed;
      j["trace_arrivals"] = o.trace_arrivals;
      out.write(j);
    }
    std::cerr << "simulated " << outcomes.size() << " seeds into "
              << opt.out_dir << "\n";
    return 0;
  }

  const auto result = simulator::run(sc);

  {
    records::JsonlWriter trace_out(opt.out_dir + "/trace.jsonl");
    trace_out.write(json{{"type", "meta"},
                         {"kind", "trace"},
                         {"schema", records::kSchemaVersion},
                         {"run_id", result.run_id},
                         {"seed", sc.seed},
                         {"duration_s", sc.duration_s},
                         {"lens", format_prefix(sc.lens)}});
    for (const auto& obs : result.trace) {
      trace_out.write(records::observed_to_json(obs));
    }
  }
  {
    records::JsonlWriter truth_out(opt.out_dir + "/truth.jsonl");
    truth_out.write(truth_meta(result, sc));
    for (const auto& te : result.truth.emissions) {
      json j{{"type", "emission"},   {"send_ns", te.send_ns},
             {"src", format_ipv4(te.src)}, {"host_id", te.host_id},
             {"seq", te.seq},        {"dst", format_ipv4(te.dst)},
             {"hops", te.hops},      {"in_lens", te.in_lens},
             {"suppressed", te.suppressed}, {"ttl_expired", te.ttl_expired},
             {"spoofed", te.spoofed}};
      if (te.delivered()) j["recv_ns"] = te.recv_ns;
      if (te.host_index != UINT32_MAX) j["host_index"] = te.host_index;
      truth_out.write(j);
    }
    for (const auto& r : result.truth.rotations) {
      truth_out.write(json{{"type", "rotation"},
                           {"t_ns", r.t_ns},
                           {"host_index", r.host_index},
                           {"old_id", r.old_id},
                           {"new_id", r.new_id}});
    }
  }
  if (opt.write_pcap) {
    pcap::Writer w(opt.out_dir + "/trace.pcap");
    for (const auto& obs : result.trace) {
      const auto payload = wire::encode(obs.body);
      std::vector<uint8_t> frame;
      if (obs.transport.proto == wire::TransportKind::Proto::UdpPort) {
        frame = pcap::build_udp_frame(obs.src_addr, obs.dst_addr,
                                      obs.arrival_ttl, obs.transport.udp_port,
                                      obs.transport.udp_port, payload);
      } else {
        frame = pcap::build_icmp_frame(obs.src_addr, obs.dst_addr,
                                       obs.arrival_ttl, payload);
      }
      w.write(obs.recv_time_ns, frame);
    }
  }

  const auto bundle = analysis::run_pipeline(
      result.trace, sc.lens, pipeline, result.run_id, sc.duration_s);
  write_reports(bundle, opt.out_dir + "/reports.jsonl", "all");

  const auto metrics =
      simulator::evaluate(result.trace, result.truth, bundle, pipeline.params);
  std::ofstream metrics_out(opt.out_dir + "/metrics.json");
  metrics_out << simulator::metrics_to_json(metrics).dump(2) << "\n";

  std::cerr << "run " << result.run_id << ": " << result.trace.size()
            << " arrivals, " << result.truth.emissions.size()
            << " emissions -> " << opt.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// send
// ---------------------------------------------------------------------------

struct SendOptions {
  std::string config_path;
  std::string out_path;
  bool network = false;
  double duration_s = 0;
  bool virtual_clock = false;
};

int run_send(const SendOptions& opt) {
  const auto cfg = config::load_config(opt.config_path);
  if (cfg.sender_cfg.interfaces.empty()) {
    std::cerr << "config has no sender interfaces\n";
    return 1;
  }
  if (opt.out_path.empty() && !opt.network) {
    std::cerr << "choose --out FILE or --network\n";
    return 2;
  }
  if (opt.virtual_clock && opt.duration_s <= 0) {
    std::cerr << "--virtual needs --duration\n";
    return 2;
  }

  sender::Sender snd(cfg.sender_cfg);
  std::unique_ptr<sender::Emitter> emitter;
  emitters::NetworkEmitter* net = nullptr;
  if (opt.network) {
    auto owned = std::make_unique<emitters::NetworkEmitter>();
    net = owned.get();
    emitter = std::move(owned);
  } else {
    emitter = std::make_unique<emitters::FileEmitter>(opt.out_path);
  }

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  uint64_t until = UINT64_MAX;
  if (opt.virtual_clock) {
    sender::VirtualClock clock(0);
    until = static_cast<uint64_t>(opt.duration_s * 1e9);
    snd.run(clock, *emitter, g_stop, until);
  } else {
    sender::SystemClock clock;
    if (opt.duration_s > 0) {
      until = clock.now_ns() + static_cast<uint64_t>(opt.duration_s * 1e9);
    }
    snd.run(clock, *emitter, g_stop, until);
  }

  if (net && net->failures() > 0) {
    std::cerr << "emit failures: " << net->failures() << " (last: "
              << net->last_error() << ")\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// observe
// ---------------------------------------------------------------------------

struct ObserveOptions {
  std::string config_path;
  std::string lens;
  std::vector<std::string> pcaps;
  std::vector<std::string> record_files;
  int listen_port = -1;
  std::string bind_addr = "0.0.0.0";
  double duration_s = 0;
  std::string state_out;
  std::string emit_records;
};

int run_observe(const ObserveOptions& opt) {
  observer::StoreConfig store_cfg;
  uint16_t udp_port = wire::kDefaultUdpPort;
  if (!opt.config_path.empty()) {
    const auto cfg = config::load_config(opt.config_path);
    store_cfg = cfg.observer_cfg;
    udp_port = cfg.udp_port;
  }
  if (!opt.lens.empty()) {
    const auto lens = parse_prefix(opt.lens);
    if (!lens) {
      std::cerr << "bad lens: " << opt.lens << "\n";
      return 2;
    }
    store_cfg.lens = *lens;
  }
  if (store_cfg.lens.mask_len == 0 && store_cfg.lens.addr == 0 &&
      opt.lens.empty() && opt.config_path.empty()) {
    std::cerr << "a lens is required (--lens or config)\n";
    return 2;
  }

  observer::StateStore store(store_cfg);
  std::unique_ptr<records::JsonlWriter> echo;
  if (!opt.emit_records.empty()) {
    echo = std::make_unique<records::JsonlWriter>(opt.emit_records);
  }
  records::JsonlWriter anomalies_out("/dev/stdout");

  uint64_t out_of_lens = 0;
  auto ingest = [&](const wire::ObservedHeartbeat& obs) {
    if (!store_cfg.lens.contains(obs.dst_addr)) {
      out_of_lens++;
      return;
    }
    const auto anomalies = store.ingest(obs);
    for (const auto& a : anomalies) {
      anomalies_out.write(json{{"type", "anomaly"},
                               {"kind", observer::to_string(a.kind)},
                               {"src", format_ipv4(a.key.src_addr)},
                               {"host_id", a.key.host_id},
                               {"recv_ns", a.recv_time_ns},
                               {"seq", a.seq},
                               {"detail", a.detail}});
    }
    if (echo) echo->write(records::observed_to_json(obs));
  };

  observer::IngestStats stats;
  for (const auto& path : opt.pcaps) {
    const auto s = observer::load_pcap(path, store_cfg.lens, ingest, udp_port);
    stats.packets += s.packets;
    stats.non_heartbeat += s.non_heartbeat;
    stats.malformed += s.malformed;
    stats.out_of_lens += s.out_of_lens;
    stats.yielded += s.yielded;
  }
  for (const auto& path : opt.record_files) {
    records::for_each_jsonl(path, [&](const json& j) {
      if (j.contains("type")) return;  // meta or report lines
      stats.packets++;
      ingest(records::observed_from_json(j));
      stats.yielded++;
    });
  }
  if (opt.listen_port >= 0) {
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    emitters::UdpListener listener(static_cast<uint16_t>(opt.listen_port),
                                   opt.bind_addr);
    sender::SystemClock clock;
    const uint64_t until =
        opt.duration_s > 0
            ? clock.now_ns() + static_cast<uint64_t>(opt.duration_s * 1e9)
            : UINT64_MAX;
    while (!g_stop.load() && clock.now_ns() < until) {
      auto obs = listener.poll(200);
      if (obs) {
        stats.packets++;
        ingest(*obs);
        stats.yielded++;
      }
    }
    stats.non_heartbeat += listener.non_heartbeat();
    stats.malformed += listener.malformed();
  }

  stats.out_of_lens += out_of_lens;
  if (!opt.state_out.empty()) {
    config::save_snapshot(store.snapshot(), opt.state_out);
  }
  std::cerr << "ingested " << store.ingested() << " arrivals from "
            << stats.packets << " inputs (" << stats.non_heartbeat
            << " non-heartbeat, " << stats.malformed << " malformed, "
            << stats.out_of_lens << " out of lens); " << store.source_count()
            << " sources\n";
  return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  std::string config_path;
  std::string state_path;
  std::string records_path;
  std::string report = "all";
  std::string out_path;
  double now_s = 0;
  // localize inputs
  bool localize = false;
  int outbound_lhb = -1;
  int outbound_ihb = -1;
  double inbound_global_p = -1;
  double target_prefix_p = -1;
  int provider_lhb = -1;
  bool derive = false;
  std::string local_prefix, provider_prefix, target_prefix;
  double recent_window_s = 600;
};

int run_analyze(const AnalyzeOptions& opt,
                analysis::PipelineConfig pipeline) {
  if (!opt.config_path.empty()) {
    const auto cfg = config::load_config(opt.config_path);
    pipeline = cfg.pipeline;
  }

  const std::string out_path =
      opt.out_path.empty() ? "/dev/stdout" : opt.out_path;

  if (opt.localize || opt.report == "localize") {
    inference::CpeView view;
    if (opt.derive) {
      if (opt.state_path.empty() || opt.local_prefix.empty()) {
        std::cerr << "--derive needs --state and --local-prefix\n";
        return 2;
      }
      const auto snap = config::load_snapshot(opt.state_path);
      const auto local = parse_prefix(opt.local_prefix);
      if (!local) {
        std::cerr << "bad --local-prefix\n";
        return 2;
      }
      const uint64_t now_ns = static_cast<uint64_t>(opt.now_s * 1e9);
      const uint64_t recent_ns =
          static_cast<uint64_t>(opt.recent_window_s * 1e9);
      const unsigned mask = std::min<unsigned>(snap.lens.mask_len, 24);
      double global_p = 1.0;
      bool any_external = false;
      for (const auto& st : snap.states) {
        const bool recent =
            st.last_seen_ns + recent_ns >= now_ns || st.last_seen_ns >= now_ns;
        if (local->contains(st.key.src_addr)) {
          if (recent && st.lhb_count > 0) view.outbound_lhb_seen = true;
          if (recent && st.ihb_count > 0) view.outbound_ihb_seen = true;
          continue;
        }
        any_external = true;
        const double silence =
            st.last_seen_ns >= now_ns
                ? 0.0
                : static_cast<double>(now_ns - st.last_seen_ns) / 1e9;
        global_p *= inference::silence_consistency(st.declared_rate_uhz, mask,
                                                   silence);
        if (!opt.provider_prefix.empty()) {
          const auto provider = parse_prefix(opt.provider_prefix);
          if (provider && provider->contains(st.key.src_addr) && recent &&
              st.lhb_count > 0) {
            view.provider_lhb_seen = true;
          }
        }
      }
      if (any_external) view.inbound_global_p_consistent = global_p;
      if (!opt.provider_prefix.empty() && !view.provider_lhb_seen) {
        view.provider_lhb_seen = false;
      }
      if (!opt.target_prefix.empty()) {
        const auto target = parse_prefix(opt.target_prefix);
        if (!target) {
          std::cerr << "bad --target-prefix\n";
          return 2;
        }
        double p = 1.0;
        bool any = false;
        for (const auto& st : snap.states) {
          if (!target->contains(st.key.src_addr)) continue;
          any = true;
          const double silence =
              st.last_seen_ns >= now_ns
                  ? 0.0
                  : static_cast<double>(now_ns - st.last_seen_ns) / 1e9;
          p *= inference::silence_consistency(st.declared_rate_uhz, mask,
                                              silence);
        }
        if (any) view.inbound_target_prefix_p_consistent = p;
      }
    } else {
      if (opt.outbound_lhb < 0 || opt.outbound_ihb < 0) {
        std::cerr << "localize needs --outbound-lhb and --outbound-ihb "
                     "(or --derive)\n";
        return 2;
      }
      view.outbound_lhb_seen = opt.outbound_lhb > 0;
      view.outbound_ihb_seen = opt.outbound_ihb > 0;
      if (opt.inbound_global_p >= 0) {
        view.inbound_global_p_consistent = opt.inbound_global_p;
      }
      if (opt.target_prefix_p >= 0) {
        view.inbound_target_prefix_p_consistent = opt.target_prefix_p;
      }
      if (opt.provider_lhb >= 0) view.provider_lhb_seen = opt.provider_lhb > 0;
    }
    const auto loc =
        inference::localize_fault(view, pipeline.params.outage_threshold);
    records::JsonlWriter out(out_path);
    out.write(records::report_to_json(loc));
    return 0;
  }

  inference::ReportBundle bundle;
  if (!opt.records_path.empty()) {
    std::vector<wire::ObservedHeartbeat> trace;
    std::string run_id;
    Prefix lens{};
    bool lens_known = false;
    double duration_s = opt.now_s;
    records::for_each_jsonl(opt.records_path, [&](const json& j) {
      if (j.contains("type")) {
        if (j.at("type") == "meta") {
          run_id = j.value("run_id", "");
          duration_s = j.value("duration_s", duration_s);
          if (j.contains("lens")) {
            const auto p = parse_prefix(j.at("lens").get<std::string>());
            if (p) {
              lens = *p;
              lens_known = true;
            }
          }
        }
        return;
      }
      trace.push_back(records::observed_from_json(j));
    });
    if (!lens_known) {
      std::cerr << "records carry no lens meta; using /" << pipeline.params.lens_mask
                << " of first destination\n";
      if (trace.empty()) {
        std::cerr << "no arrivals in records\n";
        return 1;
      }
      lens = Prefix::of(trace.front().dst_addr,
                        static_cast<uint8_t>(pipeline.params.lens_mask));
    }
    pipeline.params.lens_mask = lens.mask_len;
    bundle = analysis::run_pipeline(trace, lens, pipeline, run_id, duration_s);
  } else if (!opt.state_path.empty()) {
    const auto snap = config::load_snapshot(opt.state_path);
    pipeline.params.lens_mask = snap.lens.mask_len;
    const uint64_t now_ns = opt.now_s > 0
                                ? static_cast<uint64_t>(opt.now_s * 1e9)
                                : [&] {
                                    uint64_t last = 0;
                                    for (const auto& st : snap.states) {
                                      last = std::max(last, st.last_seen_ns);
                                    }
                                    return last;
                                  }();
    if (snap.lens.mask_len <= 24) {
      bundle.assessments = analysis::assess_outages(snap, now_ns,
                                                    pipeline.params,
                                                    pipeline.exec);
    } else {
      std::cerr << "lens narrower than /24: skipping outage assessments\n";
    }
    bundle.path_events =
        analysis::detect_all_path_events(snap, pipeline.params, pipeline.exec);
    auto groups = inference::correlate_shared_fate(
        bundle.path_events, pipeline.params.shared_fate_tau_s);
    bundle.spoof_alerts = analysis::detect_all_spoofs(
        snap, pipeline.params, bundle.path_events, pipeline.exec);
    for (auto& g : groups) bundle.path_events.push_back(std::move(g));
    bundle.alias_sets = inference::alias_candidates(snap, 0, now_ns);
    bundle.nat_estimates =
        inference::nat_estimates(snap, 0, now_ns, pipeline.params.nat_id_space);
  } else {
    std::cerr << "analyze needs --records or --state\n";
    return 2;
  }

  write_reports(bundle, out_path, opt.report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Internet heartbeat toolkit"};
  app.require_subcommand(1);

  ModelOptions model_opt;
  auto* model = app.add_subcommand("model", "closed-form calculators");
  model->require_subcommand(1);
  auto* m_outage = model->add_subcommand("outage", "silence consistency");
  m_outage->add_option("--rate", model_opt.rate_pps, "sender rate in pps")
      ->required();
  m_outage->add_option("--lens-mask", model_opt.lens_mask)->required();
  m_outage->add_option("--silence", model_opt.silence_s, "seconds")->required();
  m_outage->add_flag("--poisson", model_opt.poisson);
  auto* m_rate = model->add_subcommand("rate", "expected lens arrival rate");
  m_rate->add_option("--participants", model_opt.participants)->required();
  m_rate->add_option("--pps", model_opt.rate_pps)->required();
  m_rate->add_option("--lens-mask", model_opt.lens_mask)->required();
  auto* m_cov = model->add_subcommand("coverage", "coverage cost per sender");
  m_cov->add_option("--pool", model_opt.pool, "full_v4 | per24 | <size>");
  m_cov->add_option("--senders", model_opt.senders)->required();
  m_cov->add_option("--order", model_opt.order, "permutation | random");
  auto* m_probe = model->add_subcommand("interprobe", "sends between lens hits");
  m_probe->add_option("--lens-mask", model_opt.lens_mask)->required();

  SimulateOptions sim_opt;
  analysis::PipelineConfig pipeline_default;
  auto* sim = app.add_subcommand("simulate", "run a scenario deterministically");
  sim->add_option("--scenario", sim_opt.scenario_path)->required();
  auto* seed_opt =
      sim->add_option("--seed", sim_opt.seed, "overrides the scenario seed");
  sim->add_option("--seeds", sim_opt.seeds, "number of consecutive seeds");
  sim->add_option("--out", sim_opt.out_dir)->required();
  sim->add_flag("--pcap", sim_opt.write_pcap, "also write trace.pcap");
  sim->add_flag("--parallel", sim_opt.parallel, "parallelize across seeds");
  sim->add_option("--assessment-interval", pipeline_default.assessment_interval_s);

  SendOptions send_opt;
  auto* send = app.add_subcommand("send", "run the heartbeat sender");
  send->add_option("--config", send_opt.config_path)->required();
  send->add_option("--out", send_opt.out_path, "write emission records");
  send->add_flag("--network", send_opt.network, "emit on the wire");
  send->add_option("--duration", send_opt.duration_s, "seconds");
  send->add_flag("--virtual", send_opt.virtual_clock,
                 "virtual clock (with --out)");

  ObserveOptions obs_opt;
  auto* obs = app.add_subcommand("observe", "ingest captures into state");
  obs->add_option("--config", obs_opt.config_path);
  obs->add_option("--lens", obs_opt.lens, "prefix, e.g. 10.0.0.0/8");
  obs->add_option("--pcap", obs_opt.pcaps, "pcap file(s)");
  obs->add_option("--records", obs_opt.record_files, "record log(s)");
  obs->add_option("--listen", obs_opt.listen_port, "UDP port to capture");
  obs->add_option("--bind", obs_opt.bind_addr);
  obs->add_option("--duration", obs_opt.duration_s, "listen duration");
  obs->add_option("--state-out", obs_opt.state_out, "snapshot file to write");
  obs->add_option("--emit-records", obs_opt.emit_records);

  AnalyzeOptions an_opt;
  auto* an = app.add_subcommand("analyze", "emit report records");
  an->add_option("--config", an_opt.config_path);
  an->add_option("--state", an_opt.state_path, "snapshot file");
  an->add_option("--records", an_opt.records_path, "trace record log");
  an->add_option("--report", an_opt.report,
                 "outage|paths|spoof|alias|nat|localize|all");
  an->add_option("-o,--out", an_opt.out_path);
  an->add_option("--now", an_opt.now_s, "assessment instant (seconds)");
  an->add_option("--outbound-lhb", an_opt.outbound_lhb, "localize: 0/1");
  an->add_option("--outbound-ihb", an_opt.outbound_ihb, "localize: 0/1");
  an->add_option("--inbound-global-p", an_opt.inbound_global_p);
  an->add_option("--target-prefix-p", an_opt.target_prefix_p);
  an->add_option("--provider-lhb", an_opt.provider_lhb, "localize: 0/1");
  an->add_flag("--derive", an_opt.derive, "derive the CPE view from --state");
  an->add_option("--local-prefix", an_opt.local_prefix);
  an->add_option("--provider-prefix", an_opt.provider_prefix);
  an->add_option("--target-prefix", an_opt.target_prefix);
  an->add_option("--recent-window", an_opt.recent_window_s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (m_outage->parsed()) return run_model_outage(model_opt);
    if (m_rate->parsed()) return run_model_rate(model_opt);
    if (m_cov->parsed()) return run_model_coverage(model_opt);
    if (m_probe->parsed()) return run_model_interprobe(model_opt);
    if (sim->parsed()) {
      sim_opt.seed_set = seed_opt->count() > 0;
      return run_simulate(sim_opt, pipeline_default);
    }
    if (send->parsed()) return run_send(send_opt);
    if (obs->parsed()) return run_observe(obs_opt);
    if (an->parsed()) return run_analyze(an_opt, pipeline_default);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
