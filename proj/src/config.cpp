#include "ihb/config.hpp"

#include <fstream>

#include "ihb/records.hpp"

namespace ihb::config {

using nlohmann::json;

namespace {

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

void check_range(double v, double lo, double hi, const std::string& name) {
  if (v < lo || v > hi) {
    throw ConfigError(name + " = " + std::to_string(v) + " outside [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

Prefix prefix_field(const json& j, const char* field,
                    const std::string& where) {
  const auto p = parse_prefix(j.at(field).get<std::string>());
  if (!p) throw ConfigError("bad prefix in " + where + "." + field);
  return *p;
}

schedule::Schedule schedule_from_json(const json& j, const std::string& where) {
  schedule::Schedule sched;
  if (j.contains("pool")) {
    const json& pj = j.at("pool");
    if (pj.is_string()) {
      const auto s = pj.get<std::string>();
      if (s == "full_v4") sched.pool = schedule::PoolSpec::full_v4();
      else if (s == "per24") sched.pool = schedule::PoolSpec::per24();
      else throw ConfigError("bad pool in " + where);
    } else {
      require_keys(pj, {"local"}, where + ".pool");
      sched.pool = schedule::PoolSpec::local_subnet(
          prefix_field(pj, "local", where + ".pool"));
    }
  }
  if (j.contains("order")) {
    const json& oj = j.at("order");
    require_keys(oj, {"kind", "seed", "key", "repeat_across_epochs"},
                 where + ".order");
    const auto kind = oj.value("kind", std::string("random"));
    if (kind == "random") {
      sched.order = schedule::OrderSpec::pure_random(oj.value("seed", 0ull));
    } else if (kind == "permutation") {
      sched.order = schedule::OrderSpec::permutation(
          oj.value("key", 0ull), oj.value("repeat_across_epochs", true));
    } else {
      throw ConfigError("bad order kind in " + where);
    }
  }
  return sched;
}

}  // namespace

Config config_from_json(const json& j) {
  require_keys(j, {"sender", "observer", "inference", "paths"}, "config");
  Config cfg;

  if (j.contains("sender")) {
    const json& sj = j.at("sender");
    require_keys(sj,
                 {"host_id", "seed", "rotation_period_s", "integrity",
                  "interfaces"},
                 "sender");
    cfg.sender_cfg.host_id = sj.value("host_id", 0);
    cfg.sender_cfg.seed = sj.value("seed", 0ull);
    if (sj.contains("rotation_period_s")) {
      const double period = sj.at("rotation_period_s").get<double>();
      if (period <= 0) throw ConfigError("rotation_period_s must be > 0");
      cfg.sender_cfg.hostid_rotation_period_ns =
          static_cast<uint64_t>(period * 1e9);
    }
    if (sj.contains("integrity")) {
      const json& ij = sj.at("integrity");
      require_keys(ij, {"seed", "chain_length", "disclosure_lag"},
                   "sender.integrity");
      integrity::ChainConfig cc;
      cc.seed = ij.value("seed", cfg.sender_cfg.seed);
      cc.length = ij.value("chain_length", 1u << 20);
      cc.disclosure_lag = ij.value("disclosure_lag", 1u);
      if (cc.length < 2) throw ConfigError("chain_length must be >= 2");
      if (cc.disclosure_lag < 1) throw ConfigError("disclosure_lag must be >= 1");
      cfg.sender_cfg.integrity = cc;
    }
    for (const auto& fj : sj.value("interfaces", json::array())) {
      const std::string where =
          "sender.interfaces[" +
          std::to_string(cfg.sender_cfg.interfaces.size()) + "]";
      require_keys(fj,
                   {"name", "src", "rate_uhz", "ttl", "pair_mode", "transport",
                    "pool", "order"},
                   where);
      sender::InterfaceConfig iface;
      iface.name = fj.value("name", "if" + std::to_string(
                                             cfg.sender_cfg.interfaces.size()));
      const auto src = parse_ipv4(fj.at("src").get<std::string>());
      if (!src) throw ConfigError("bad src in " + where);
      iface.src_addr = *src;
      iface.rate_uhz = fj.at("rate_uhz").get<uint32_t>();
      if (iface.rate_uhz == 0) throw ConfigError(where + ": rate_uhz must be > 0");
      iface.ihb_ttl = fj.value("ttl", 64);
      iface.pair_mode = fj.value("pair_mode", false);
      if (fj.contains("transport")) {
        iface.transport = records::transport_from_string(
            fj.at("transport").get<std::string>());
      }
      iface.sched = schedule_from_json(fj, where);
      cfg.sender_cfg.interfaces.push_back(std::move(iface));
    }
  }

  if (j.contains("observer")) {
    const json& oj = j.at("observer");
    require_keys(oj,
                 {"lens", "capacity", "ring", "ttl_jump_threshold",
                  "pair_window_ms", "udp_port", "verify_integrity"},
                 "observer");
    cfg.observer_cfg.lens = prefix_field(oj, "lens", "observer");
    cfg.observer_cfg.capacity = oj.value("capacity", size_t{1} << 20);
    cfg.observer_cfg.ring_capacity = oj.value("ring", size_t{1024});
    cfg.observer_cfg.ttl_jump_threshold = oj.value("ttl_jump_threshold", 3);
    check_range(cfg.observer_cfg.ttl_jump_threshold, 1, 255,
                "observer.ttl_jump_threshold");
    cfg.observer_cfg.pair_window_ns =
        static_cast<uint64_t>(oj.value("pair_window_ms", 100.0) * 1e6);
    cfg.observer_cfg.verify_integrity = oj.value("verify_integrity", true);
    const int port = oj.value("udp_port", int{wire::kDefaultUdpPort});
    if (port < 1 || port > 65535) throw ConfigError("bad observer.udp_port");
    cfg.udp_port = static_cast<uint16_t>(port);
    cfg.pipeline.ring_capacity = cfg.observer_cfg.ring_capacity;
    cfg.pipeline.store_capacity = cfg.observer_cfg.capacity;
    cfg.pipeline.ttl_jump_threshold = cfg.observer_cfg.ttl_jump_threshold;
    cfg.pipeline.pair_window_ns = cfg.observer_cfg.pair_window_ns;
    cfg.pipeline.params.lens_mask = cfg.observer_cfg.lens.mask_len;
  }

  if (j.contains("inference")) {
    const json& ij = j.at("inference");
    require_keys(ij,
                 {"outage_threshold", "assessment_interval_s", "path_window_s",
                  "min_samples", "lb_mass", "lb_min_windows",
                  "shared_fate_tau_s", "spoof_margin", "alias_window_s",
                  "nat_id_space"},
                 "inference");
    inference::Params& p = cfg.pipeline.params;
    p.outage_threshold = ij.value("outage_threshold", 0.05);
    check_range(p.outage_threshold, 1e-9, 1.0, "inference.outage_threshold");
    cfg.pipeline.assessment_interval_s = ij.value("assessment_interval_s", 300.0);
    check_range(cfg.pipeline.assessment_interval_s, 1, 1e7,
                "inference.assessment_interval_s");
    p.path_window_s = ij.value("path_window_s", 300.0);
    check_range(p.path_window_s, 1, 1e7, "inference.path_window_s");
    p.min_samples = ij.value("min_samples", size_t{10});
    check_range(static_cast<double>(p.min_samples), 1, 1e6,
                "inference.min_samples");
    p.lb_mass = ij.value("lb_mass", 0.25);
    check_range(p.lb_mass, 0.01, 0.5, "inference.lb_mass");
    p.lb_min_windows = ij.value("lb_min_windows", 3);
    check_range(p.lb_min_windows, 1, 1000, "inference.lb_min_windows");
    p.shared_fate_tau_s = ij.value("shared_fate_tau_s", 60.0);
    check_range(p.shared_fate_tau_s, 0, 1e7, "inference.shared_fate_tau_s");
    p.spoof_margin = ij.value("spoof_margin", 3);
    check_range(p.spoof_margin, 0, 255, "inference.spoof_margin");
    p.alias_window_s = ij.value("alias_window_s", 1800.0);
    check_range(p.alias_window_s, 1, 1e8, "inference.alias_window_s");
    p.nat_id_space = ij.value("nat_id_space", 65536.0);
    check_range(p.nat_id_space, 2, 4294967296.0, "inference.nat_id_space");
  }

  if (j.contains("paths")) {
    const json& pj = j.at("paths");
    require_keys(pj, {"state_dir", "report_path"}, "paths");
    cfg.state_dir = pj.value("state_dir", "");
    cfg.report_path = pj.value("report_path", "");
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid json in config: " + path);
  return config_from_json(j);
}

json snapshot_to_json(const observer::Snapshot& snap) {
  json states = json::array();
  for (const auto& st : snap.states) {
    json history = json::array();
    for (const auto& a : st.history) {
      history.push_back(json::array({a.recv_time_ns, a.seq, a.arrival_ttl,
                                     a.orig_ttl, a.timestamp_ns}));
    }
    states.push_back(json{
        {"src", format_ipv4(st.key.src_addr)},
        {"host_id", st.key.host_id},
        {"declared_rate_uhz", st.declared_rate_uhz},
        {"first_seen_ns", st.first_seen_ns},
        {"last_seen_ns", st.last_seen_ns},
        {"hop_min", st.hop_min},
        {"hop_max", st.hop_max},
        {"rate_conflicts", st.rate_conflicts},
        {"seq_regressions", st.seq_regressions},
        {"duplicate_seqs", st.duplicate_seqs},
        {"ttl_jumps", st.ttl_jumps},
        {"pair_echoes", st.pair_echoes},
        {"ihb_count", st.ihb_count},
        {"lhb_count", st.lhb_count},
        {"max_seq", st.max_seq},
        {"any_arrival", st.any_arrival},
        {"ring_evictions", st.ring_evictions},
        {"authenticated", st.authenticated},
        {"forged", st.forged},
        {"history", history},
    });
  }
  return json{{"version", kSnapshotVersion},
              {"lens", format_prefix(snap.lens)},
              {"ingested", snap.ingested},
              {"evicted_states", snap.evicted_states},
              {"evicted_state_arrivals", snap.evicted_state_arrivals},
              {"states", states}};
}

observer::Snapshot snapshot_from_json(const json& j) {
  if (j.value("version", -1) != kSnapshotVersion) {
    throw ConfigError("unsupported snapshot version");
  }
  observer::Snapshot snap;
  const auto lens = parse_prefix(j.at("lens").get<std::string>());
  if (!lens) throw ConfigError("bad lens in snapshot");
  snap.lens = *lens;
  snap.ingested = j.at("ingested").get<uint64_t>();
  snap.evicted_states = j.at("evicted_states").get<uint64_t>();
  snap.evicted_state_arrivals = j.at("evicted_state_arrivals").get<uint64_t>();
  for (const auto& sj : j.at("states")) {
    observer::SourceState st;
    const auto src = parse_ipv4(sj.at("src").get<std::string>());
    if (!src) throw ConfigError("bad src in snapshot state");
    st.key.src_addr = *src;
    st.key.host_id = sj.at("host_id").get<uint16_t>();
    st.declared_rate_uhz = sj.at("declared_rate_uhz").get<uint32_t>();
    st.first_seen_ns = sj.at("first_seen_ns").get<uint64_t>();
    st.last_seen_ns = sj.at("last_seen_ns").get<uint64_t>();
    st.hop_min = sj.at("hop_min").get<int>();
    st.hop_max = sj.at("hop_max").get<int>();
    st.rate_conflicts = sj.at("rate_conflicts").get<uint64_t>();
    st.seq_regressions = sj.at("seq_regressions").get<uint64_t>();
    st.duplicate_seqs = sj.at("duplicate_seqs").get<uint64_t>();
    st.ttl_jumps = sj.at("ttl_jumps").get<uint64_t>();
    st.pair_echoes = sj.at("pair_echoes").get<uint64_t>();
    st.ihb_count = sj.at("ihb_count").get<uint64_t>();
    st.lhb_count = sj.at("lhb_count").get<uint64_t>();
    st.max_seq = sj.at("max_seq").get<uint32_t>();
    st.any_arrival = sj.at("any_arrival").get<bool>();
    st.ring_evictions = sj.at("ring_evictions").get<uint64_t>();
    st.authenticated = sj.at("authenticated").get<uint64_t>();
    st.forged = sj.at("forged").get<uint64_t>();
    for (const auto& aj : sj.at("history")) {
      observer::Arrival a;
      a.recv_time_ns = aj.at(0).get<uint64_t>();
      a.seq = aj.at(1).get<uint32_t>();
      a.arrival_ttl = aj.at(2).get<uint8_t>();
      a.orig_ttl = aj.at(3).get<uint8_t>();
      a.timestamp_ns = aj.at(4).get<uint64_t>();
      st.history.push_back(a);
    }
    snap.states.push_back(std::move(st));
  }
  return snap;
}

void save_snapshot(const observer::Snapshot& snap, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write snapshot: " + path);
  out << snapshot_to_json(snap).dump() << '\n';
}

observer::Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open snapshot: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid json in snapshot: " + path);
  return snapshot_from_json(j);
}

}  // namespace ihb::config
