#include "ihb/simulator.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ihb/records.hpp"

namespace ihb::simulator {

using nlohmann::json;

namespace {

uint64_t to_ns(double seconds) {
  return static_cast<uint64_t>(seconds * 1e9 + 0.5);
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw ScenarioError("unknown key '" + key + "' in " + where);
    }
  }
}

Ipv4 addr_of(const json& j, const char* field, const std::string& where) {
  const auto a = parse_ipv4(j.at(field).get<std::string>());
  if (!a) throw ScenarioError("bad address in " + where + "." + field);
  return *a;
}

Prefix prefix_of(const json& j, const char* field, const std::string& where) {
  const auto p = parse_prefix(j.at(field).get<std::string>());
  if (!p) throw ScenarioError("bad prefix in " + where + "." + field);
  return *p;
}

}  // namespace

std::vector<std::string> validate(const Scenario& sc) {
  std::vector<std::string> problems;
  auto problem = [&](const std::string& p) { problems.push_back(p); };

  if (sc.duration_s <= 0) problem("duration_s must be > 0");
  if (sc.lens.mask_len > 24) problem("lens mask must be <= 24");
  if (sc.per_hop_delay_s < 0) problem("per_hop_delay_s must be >= 0");
  if (sc.hosts.empty() && sc.spoofers.empty()) {
    problem("scenario has neither hosts nor spoofers");
  }

  for (size_t i = 0; i < sc.hosts.size(); ++i) {
    const HostSpec& h = sc.hosts[i];
    const std::string where = "hosts[" + std::to_string(i) + "]";
    if (h.addresses.empty()) problem(where + ": no addresses");
    if (h.rate_uhz == 0) problem(where + ": rate_uhz must be > 0");
    if (h.path.empty()) problem(where + ": empty path");
    for (const auto& seg : h.path) {
      if (seg.hop_count < 0) problem(where + ": negative hop count");
      if (seg.start_s < 0 || seg.start_s > sc.duration_s) {
        problem(where + ": path segment outside run");
      }
    }
    for (size_t k = 1; k < h.path.size(); ++k) {
      if (h.path[k].start_s < h.path[k - 1].start_s) {
        problem(where + ": path segments not sorted");
      }
    }
    if (h.host_id.mode == HostIdPolicy::Mode::Rotating &&
        h.host_id.rotation_period_s <= 0) {
      problem(where + ": rotating host_id needs a positive period");
    }
    if (const char* err = schedule::validate(h.pool)) {
      problem(where + ": " + err);
    }
  }

  auto check_window = [&](double start, double end, const std::string& where) {
    if (start < 0 || end > sc.duration_s || start >= end) {
      problem(where + ": window [" + std::to_string(start) + ", " +
              std::to_string(end) + ") invalid for this run");
    }
  };
  for (size_t i = 0; i < sc.outages.size(); ++i) {
    check_window(sc.outages[i].start_s, sc.outages[i].end_s,
                 "outages[" + std::to_string(i) + "]");
  }
  for (size_t i = 0; i < sc.route_shifts.size(); ++i) {
    const auto& e = sc.route_shifts[i];
    if (e.start_s < 0 || e.start_s > sc.duration_s) {
      problem("route_shifts[" + std::to_string(i) + "]: start outside run");
    }
  }
  for (size_t i = 0; i < sc.load_balances.size(); ++i) {
    const auto& e = sc.load_balances[i];
    const std::string where = "load_balances[" + std::to_string(i) + "]";
    if (e.host_index >= sc.hosts.size()) problem(where + ": bad host index");
    if (e.hop_a < 0 || e.hop_b < 0) problem(where + ": negative hops");
    if (e.split < 0 || e.split > 1) problem(where + ": split outside [0,1]");
  }
  for (size_t i = 0; i < sc.spoofers.size(); ++i) {
    const auto& e = sc.spoofers[i];
    const std::string where = "spoofers[" + std::to_string(i) + "]";
    check_window(e.start_s, e.end_s, where);
    if (e.emission_rate_uhz == 0) problem(where + ": rate must be > 0");
    if (e.declared_rate_uhz == 0) problem(where + ": declared rate must be > 0");
    if (e.hop_count < 0) problem(where + ": negative hop count");
    if (e.orig_ttl < 1) problem(where + ": orig_ttl must be >= 1");
  }
  return problems;
}

Scenario scenario_from_json(const json& j) {
  require_keys(j,
               {"duration_s", "lens", "seed", "per_hop_delay_s", "hosts",
                "events"},
               "scenario");
  Scenario sc;
  sc.duration_s = j.at("duration_s").get<double>();
  sc.lens = prefix_of(j, "lens", "scenario");
  if (!j.contains("seed")) throw ScenarioError("seed is mandatory");
  sc.seed = j.at("seed").get<uint64_t>();
  if (j.contains("per_hop_delay_s")) {
    sc.per_hop_delay_s = j.at("per_hop_delay_s").get<double>();
  }

  for (const auto& hj : j.value("hosts", json::array())) {
    const std::string where = "hosts[" + std::to_string(sc.hosts.size()) + "]";
    require_keys(hj,
                 {"addresses", "host_id", "rate_uhz", "pool", "order",
                  "pair_mode", "ihb_ttl", "transport", "integrity", "path",
                  "nat_public"},
                 where);
    HostSpec h;
    for (const auto& a : hj.at("addresses")) {
      const auto addr = parse_ipv4(a.get<std::string>());
      if (!addr) throw ScenarioError("bad address in " + where);
      h.addresses.push_back(*addr);
    }
    if (hj.contains("host_id")) {
      const json& idj = hj.at("host_id");
      require_keys(idj, {"mode", "initial", "period_s"}, where + ".host_id");
      const auto mode = idj.value("mode", std::string("fixed"));
      if (mode == "fixed") {
        h.host_id.mode = HostIdPolicy::Mode::Fixed;
      } else if (mode == "rotating") {
        h.host_id.mode = HostIdPolicy::Mode::Rotating;
        h.host_id.rotation_period_s = idj.value("period_s", 0.0);
      } else {
        throw ScenarioError("bad host_id mode in " + where);
      }
      h.host_id.initial = idj.value("initial", 0);
    }
    h.rate_uhz = hj.value("rate_uhz", 1000000u);
    if (hj.contains("pool")) {
      const json& pj = hj.at("pool");
      if (pj.is_string()) {
        const auto s = pj.get<std::string>();
        if (s == "full_v4") h.pool = schedule::PoolSpec::full_v4();
        else if (s == "per24") h.pool = schedule::PoolSpec::per24();
        else throw ScenarioError("bad pool in " + where);
      } else {
        require_keys(pj, {"local"}, where + ".pool");
        const auto p = parse_prefix(pj.at("local").get<std::string>());
        if (!p) throw ScenarioError("bad local pool prefix in " + where);
        h.pool = schedule::PoolSpec::local_subnet(*p);
      }
    }
    if (hj.contains("order")) {
      const json& oj = hj.at("order");
      require_keys(oj, {"kind", "seed", "key", "repeat_across_epochs"},
                   where + ".order");
      const auto kind = oj.value("kind", std::string("random"));
      if (kind == "random") {
        h.order = schedule::OrderSpec::pure_random(oj.value("seed", 0ull));
      } else if (kind == "permutation") {
        h.order = schedule::OrderSpec::permutation(
            oj.value("key", 0ull), oj.value("repeat_across_epochs", true));
      } else {
        throw ScenarioError("bad order kind in " + where);
      }
    }
    h.pair_mode = hj.value("pair_mode", false);
    h.ihb_ttl = hj.value("ihb_ttl", 64);
    if (hj.contains("transport")) {
      h.transport = records::transport_from_string(
          hj.at("transport").get<std::string>());
    }
    if (hj.contains("integrity")) {
      const json& ij = hj.at("integrity");
      require_keys(ij, {"chain_length", "disclosure_lag"},
                   where + ".integrity");
      integrity::ChainConfig cc;
      cc.seed = 0;  // derived from the scenario seed at run time
      cc.length = ij.value("chain_length", 1u << 20);
      cc.disclosure_lag = ij.value("disclosure_lag", 1u);
      h.integrity = cc;
    }
    if (hj.contains("path")) {
      h.path.clear();
      for (const auto& sj : hj.at("path")) {
        require_keys(sj, {"start_s", "hop_count"}, where + ".path[]");
        h.path.push_back(
            {sj.at("start_s").get<double>(), sj.at("hop_count").get<int>()});
      }
    }
    if (hj.contains("nat_public")) {
      h.nat_public = addr_of(hj, "nat_public", where);
    }
    sc.hosts.push_back(std::move(h));
  }

  for (const auto& ej : j.value("events", json::array())) {
    const auto type = ej.at("type").get<std::string>();
    const std::string where = "events[type=" + type + "]";
    if (type == "outage_prefix") {
      require_keys(ej, {"type", "prefix", "start_s", "end_s"}, where);
      sc.outages.push_back({prefix_of(ej, "prefix", where),
                            ej.at("start_s").get<double>(),
                            ej.at("end_s").get<double>()});
    } else if (type == "route_shift") {
      require_keys(ej, {"type", "prefix", "start_s", "delta_hops"}, where);
      sc.route_shifts.push_back({prefix_of(ej, "prefix", where),
                                 ej.at("start_s").get<double>(),
                                 ej.at("delta_hops").get<int>()});
    } else if (type == "load_balance") {
      require_keys(ej, {"type", "host", "hop_a", "hop_b", "split", "start_s"},
                   where);
      LoadBalanceEvent e;
      e.host_index = ej.at("host").get<size_t>();
      e.hop_a = ej.at("hop_a").get<int>();
      e.hop_b = ej.at("hop_b").get<int>();
      e.split = ej.value("split", 0.5);
      e.start_s = ej.value("start_s", 0.0);
      sc.load_balances.push_back(e);
    } else if (type == "spoofer") {
      require_keys(ej,
                   {"type", "forged_src", "forged_host_id",
                    "declared_rate_uhz", "rate_uhz", "hop_count", "orig_ttl",
                    "start_s", "end_s"},
                   where);
      SpooferEvent e;
      e.forged_src = addr_of(ej, "forged_src", where);
      e.forged_host_id = ej.at("forged_host_id").get<uint16_t>();
      e.declared_rate_uhz = ej.value("declared_rate_uhz", 1000000u);
      e.emission_rate_uhz = ej.at("rate_uhz").get<uint32_t>();
      e.hop_count = ej.at("hop_count").get<int>();
      e.orig_ttl = ej.value("orig_ttl", 64);
      e.start_s = ej.at("start_s").get<double>();
      e.end_s = ej.at("end_s").get<double>();
      sc.spoofers.push_back(e);
    } else {
      throw ScenarioError("unknown event type: " + type);
    }
  }
  return sc;
}

json scenario_to_json(const Scenario& sc) {
  json hosts = json::array();
  for (const auto& h : sc.hosts) {
    json addrs = json::array();
    for (Ipv4 a : h.addresses) addrs.push_back(format_ipv4(a));
    json hj{{"addresses", addrs}, {"rate_uhz", h.rate_uhz}};
    json idj{{"initial", h.host_id.initial}};
    if (h.host_id.mode == HostIdPolicy::Mode::Rotating) {
      idj["mode"] = "rotating";
      idj["period_s"] = h.host_id.rotation_period_s;
    } else {
      idj["mode"] = "fixed";
    }
    hj["host_id"] = idj;
    if (h.pool.kind == wire::PoolKind::Local) {
      hj["pool"] = json{{"local", format_prefix(h.pool.local)}};
    } else {
      hj["pool"] = h.pool.kind == wire::PoolKind::FullV4 ? "full_v4" : "per24";
    }
    if (h.order.kind == wire::OrderKind::Random) {
      hj["order"] = json{{"kind", "random"}, {"seed", h.order.seed}};
    } else {
      hj["order"] = json{{"kind", "permutation"},
                         {"key", h.order.key},
                         {"repeat_across_epochs", h.order.repeat_across_epochs}};
    }
    hj["pair_mode"] = h.pair_mode;
    hj["ihb_ttl"] = h.ihb_ttl;
    hj["transport"] = records::transport_to_string(h.transport);
    if (h.integrity) {
      hj["integrity"] = json{{"chain_length", h.integrity->length},
                             {"disclosure_lag", h.integrity->disclosure_lag}};
    }
    json path = json::array();
    for (const auto& seg : h.path) {
      path.push_back(json{{"start_s", seg.start_s}, {"hop_count", seg.hop_count}});
    }
    hj["path"] = path;
    if (h.nat_public) hj["nat_public"] = format_ipv4(*h.nat_public);
    hosts.push_back(std::move(hj));
  }

  json events = json::array();
  for (const auto& e : sc.outages) {
    events.push_back(json{{"type", "outage_prefix"},
                          {"prefix", format_prefix(e.prefix)},
                          {"start_s", e.start_s},
                          {"end_s", e.end_s}});
  }
  for (const auto& e : sc.route_shifts) {
    events.push_back(json{{"type", "route_shift"},
                          {"prefix", format_prefix(e.prefix)},
                          {"start_s", e.start_s},
                          {"delta_hops", e.delta_hops}});
  }
  for (const auto& e : sc.load_balances) {
    events.push_back(json{{"type", "load_balance"},
                          {"host", e.host_index},
                          {"hop_a", e.hop_a},
                          {"hop_b", e.hop_b},
                          {"split", e.split},
                          {"start_s", e.start_s}});
  }
  for (const auto& e : sc.spoofers) {
    events.push_back(json{{"type", "spoofer"},
                          {"forged_src", format_ipv4(e.forged_src)},
                          {"forged_host_id", e.forged_host_id},
                          {"declared_rate_uhz", e.declared_rate_uhz},
                          {"rate_uhz", e.emission_rate_uhz},
                          {"hop_count", e.hop_count},
                          {"orig_ttl", e.orig_ttl},
                          {"start_s", e.start_s},
                          {"end_s", e.end_s}});
  }

  return json{{"duration_s", sc.duration_s},
              {"lens", format_prefix(sc.lens)},
              {"seed", sc.seed},
              {"per_hop_delay_s", sc.per_hop_delay_s},
              {"hosts", hosts},
              {"events", events}};
}

std::string run_id_of(const Scenario& sc) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(scenario_to_json(sc).dump())));
  return buf;
}

sender::SenderConfig sender_config_for_host(const Scenario& sc,
                                            size_t host_index) {
  const HostSpec& h = sc.hosts.at(host_index);
  sender::SenderConfig cfg;
  cfg.host_id = h.host_id.initial;
  cfg.seed = mix64(sc.seed ^ mix64(host_index + 1));
  if (h.host_id.mode == HostIdPolicy::Mode::Rotating) {
    cfg.hostid_rotation_period_ns = to_ns(h.host_id.rotation_period_s);
  }
  if (h.integrity) {
    cfg.integrity = *h.integrity;
    cfg.integrity->seed = mix64(cfg.seed ^ 0x636861696eull);
  }
  for (size_t i = 0; i < h.addresses.size(); ++i) {
    sender::InterfaceConfig iface;
    iface.name = "if" + std::to_string(i);
    iface.src_addr = h.addresses[i];
    iface.sched.pool = h.pool;
    iface.sched.order = h.order;
    // Independent protocol instances per interface: distinct draw streams
    // and permutation keys.
    if (iface.sched.order.kind == wire::OrderKind::Random) {
      iface.sched.order.seed = mix64(cfg.seed ^ h.order.seed ^ mix64(i));
    } else {
      iface.sched.order.key = mix64(cfg.seed ^ h.order.key ^ mix64(i));
    }
    iface.transport = h.transport;
    iface.rate_uhz = h.rate_uhz;
    iface.ihb_ttl = h.ihb_ttl;
    iface.pair_mode = h.pair_mode;
    cfg.interfaces.push_back(std::move(iface));
  }
  return cfg;
}

namespace {

int hops_at(const HostSpec& h, double t_s) {
  int hops = h.path.front().hop_count;
  for (const auto& seg : h.path) {
    if (seg.start_s <= t_s) hops = seg.hop_count;
  }
  return hops;
}

}  // namespace

RunResult run(const Scenario& sc) {
  const auto problems = validate(sc);
  if (!problems.empty()) {
    std::string what = "invalid scenario:";
    for (const auto& p : problems) what += "\n  " + p;
    throw ScenarioError(what);
  }

  RunResult result;
  result.run_id = run_id_of(sc);
  GroundTruthLog& truth = result.truth;
  truth.run_id = result.run_id;
  truth.duration_s = sc.duration_s;
  truth.lens = sc.lens;
  truth.seed = sc.seed;
  truth.outages = sc.outages;
  truth.route_shifts = sc.route_shifts;
  truth.load_balances = sc.load_balances;
  truth.spoofers = sc.spoofers;

  const uint64_t duration_ns = to_ns(sc.duration_s);
  const uint64_t hop_delay_ns = to_ns(sc.per_hop_delay_s);

  struct PendingArrival {
    wire::ObservedHeartbeat obs;
    uint64_t order;  // deterministic tiebreak
  };
  std::vector<PendingArrival> arrivals;
  uint64_t order_counter = 0;

  auto active = [](double t_s, double start_s, double end_s) {
    return t_s >= start_s && t_s < end_s;
  };

  auto deliver = [&](const sender::Emission& e, Ipv4 observed_src, int hops,
                     bool spoofed, uint32_t host_index) {
    const double t_s = static_cast<double>(e.send_time_ns) / 1e9;
    TruthEmission te;
    te.send_ns = e.send_time_ns;
    te.src = observed_src;
    te.host_id = e.heartbeat.host_id;
    te.seq = e.heartbeat.seq;
    te.dst = e.dst_addr;
    te.hops = hops;
    te.in_lens = sc.lens.contains(e.dst_addr);
    te.spoofed = spoofed;
    te.host_index = host_index;
    if (!spoofed) {
      for (const auto& o : sc.outages) {
        if (o.prefix.contains(observed_src) && active(t_s, o.start_s, o.end_s)) {
          te.suppressed = true;
          break;
        }
      }
    }
    te.ttl_expired = hops >= static_cast<int>(e.heartbeat.orig_ttl);
    if (te.delivered()) {
      te.recv_ns = e.send_time_ns + static_cast<uint64_t>(hops) * hop_delay_ns;
      wire::ObservedHeartbeat obs;
      obs.recv_time_ns = te.recv_ns;
      obs.src_addr = observed_src;
      obs.dst_addr = e.dst_addr;
      obs.arrival_ttl = static_cast<uint8_t>(e.heartbeat.orig_ttl - hops);
      obs.transport = e.transport;
      obs.body = e.heartbeat;
      arrivals.push_back({obs, order_counter});
    }
    order_counter++;
    truth.emissions.push_back(te);
  };

  for (size_t hi = 0; hi < sc.hosts.size(); ++hi) {
    const HostSpec& h = sc.hosts[hi];
    sender::Sender snd(sender_config_for_host(sc, hi));
    snd.on_rotation = [&](uint64_t t, uint16_t old_id, uint16_t new_id) {
      truth.rotations.push_back(
          {t, static_cast<uint32_t>(hi), old_id, new_id});
    };
    sender::VirtualClock clock(0);
    sender::CollectingEmitter collected;
    std::atomic<bool> stop{false};
    snd.run(clock, collected, stop, duration_ns);

    std::vector<Ipv4> observed_addrs;
    for (Ipv4 a : h.addresses) {
      observed_addrs.push_back(h.nat_public ? *h.nat_public : a);
    }
    truth.host_addresses.push_back(observed_addrs);

    Rng lb_rng = Rng(sc.seed).fork(mix64(0x6c62 ^ (hi + 1)));
    for (const auto& e : collected.emissions) {
      const double t_s = static_cast<double>(e.send_time_ns) / 1e9;
      const Ipv4 observed_src = h.nat_public ? *h.nat_public : e.src_addr;

      int hops = hops_at(h, t_s);
      for (const auto& lb : sc.load_balances) {
        if (lb.host_index == hi && t_s >= lb.start_s) {
          hops = lb_rng.next_bool(lb.split) ? lb.hop_a : lb.hop_b;
        }
      }
      for (const auto& rs : sc.route_shifts) {
        if (rs.prefix.contains(observed_src) && t_s >= rs.start_s) {
          hops += rs.delta_hops;
        }
      }
      if (hops < 0) hops = 0;
      deliver(e, observed_src, hops, false, static_cast<uint32_t>(hi));
    }
  }

  for (size_t si = 0; si < sc.spoofers.size(); ++si) {
    const SpooferEvent& sp = sc.spoofers[si];
    Rng rng = Rng(sc.seed).fork(mix64(0x73706f ^ (si + 1)));
    const uint64_t period =
        static_cast<uint64_t>(1000000000000000ull / sp.emission_rate_uhz);
    uint32_t seq = 0;
    for (uint64_t t = to_ns(sp.start_s); t < to_ns(sp.end_s) && t < duration_ns;
         t += period, ++seq) {
      wire::Heartbeat hb;
      hb.kind = wire::HeartbeatKind::Ihb;
      hb.host_id = sp.forged_host_id;
      hb.rate_uhz = sp.declared_rate_uhz;
      hb.orig_ttl = sp.orig_ttl;
      hb.timestamp_ns = t;
      hb.pool = {wire::PoolKind::FullV4, wire::OrderKind::Random, 0};
      hb.seq = seq;
      sender::Emission e;
      e.send_time_ns = t;
      e.src_addr = sp.forged_src;
      e.dst_addr = static_cast<Ipv4>(rng.next_below(uint64_t{1} << 32));
      e.ttl = sp.orig_ttl;
      e.transport = wire::TransportKind::udp();
      e.heartbeat = hb;
      deliver(e, sp.forged_src, sp.hop_count, true, UINT32_MAX);
    }
  }

  std::sort(arrivals.begin(), arrivals.end(),
            [](const PendingArrival& a, const PendingArrival& b) {
              if (a.obs.recv_time_ns != b.obs.recv_time_ns) {
                return a.obs.recv_time_ns < b.obs.recv_time_ns;
              }
              return a.order < b.order;
            });
  result.trace.reserve(arrivals.size());
  for (auto& a : arrivals) result.trace.push_back(std::move(a.obs));
  return result;
}

json metrics_to_json(const Metrics& m) {
  json outages = json::array();
  for (const auto& o : m.outages) {
    outages.push_back(json{{"prefix", format_prefix(o.prefix)},
                           {"start_s", o.start_s},
                           {"end_s", o.end_s},
                           {"detected", o.detected},
                           {"latency_s", o.latency_s}});
  }
  auto ratio_or_null = [](double v) {
    return v < 0 ? json(nullptr) : json(v);
  };
  return json{
      {"run_id", m.run_id},
      {"outages", outages},
      {"healthy_assessments", m.healthy_assessments},
      {"flagged_healthy", m.flagged_healthy},
      {"false_positive_rate", m.false_positive_rate},
      {"spoofed_delivered", m.spoofed_delivered},
      {"spoof_alerts", m.spoof_alerts},
      {"spoof_matched", m.spoof_matched},
      {"spoof_precision", ratio_or_null(m.spoof_precision)},
      {"spoof_recall", ratio_or_null(m.spoof_recall)},
      {"alias_truth_sets", m.alias_truth_sets},
      {"alias_reported_sets", m.alias_reported_sets},
      {"alias_matched_sets", m.alias_matched_sets},
      {"alias_precision", ratio_or_null(m.alias_precision)},
      {"alias_recall", ratio_or_null(m.alias_recall)},
      {"path_scripted", m.path_scripted},
      {"path_detected", m.path_detected},
      {"path_accuracy", ratio_or_null(m.path_accuracy)},
  };
}

Metrics evaluate(const std::vector<wire::ObservedHeartbeat>& trace,
                 const GroundTruthLog& truth,
                 const inference::ReportBundle& outputs,
                 const inference::Params& params) {
  if (!outputs.run_id.empty() && outputs.run_id != truth.run_id) {
    throw std::invalid_argument("report bundle run_id " + outputs.run_id +
                                " does not match truth " + truth.run_id);
  }
  uint64_t delivered = 0;
  for (const auto& te : truth.emissions) {
    if (te.delivered()) delivered++;
  }
  if (delivered != trace.size()) {
    throw std::invalid_argument("trace/truth mismatch: " +
                                std::to_string(trace.size()) + " arrivals vs " +
                                std::to_string(delivered) + " delivered");
  }

  Metrics m;
  m.run_id = truth.run_id;

  // --- outages: first flagged assessment at/after onset ---
  std::vector<inference::OutageAssessment> assessments = outputs.assessments;
  std::sort(assessments.begin(), assessments.end(),
            [](const auto& a, const auto& b) { return a.now_ns < b.now_ns; });
  for (const auto& o : truth.outages) {
    OutageScore score;
    score.prefix = o.prefix;
    score.start_s = o.start_s;
    score.end_s = o.end_s;
    for (const auto& a : assessments) {
      if (a.verdict != inference::OutageVerdict::SuspectedOutage) continue;
      if (!o.prefix.contains(a.target.addr)) continue;
      const double now_s = static_cast<double>(a.now_ns) / 1e9;
      if (now_s < o.start_s) continue;
      score.detected = true;
      score.latency_s = now_s - o.start_s;
      break;
    }
    m.outages.push_back(score);
  }

  // --- false positives over assessments of never-outaged targets ---
  for (const auto& a : assessments) {
    bool target_has_outage = false;
    for (const auto& o : truth.outages) {
      if (o.prefix.contains(a.target.addr)) {
        target_has_outage = true;
        break;
      }
    }
    if (target_has_outage) continue;
    m.healthy_assessments++;
    if (a.verdict == inference::OutageVerdict::SuspectedOutage) {
      m.flagged_healthy++;
    }
  }
  m.false_positive_rate =
      m.healthy_assessments == 0
          ? 0.0
          : static_cast<double>(m.flagged_healthy) /
                static_cast<double>(m.healthy_assessments);

  // --- spoofing: per-arrival matching on (src, host_id, seq, recv) ---
  std::set<std::tuple<Ipv4, uint16_t, uint32_t, uint64_t>> spoofed_truth;
  for (const auto& te : truth.emissions) {
    if (te.spoofed && te.delivered()) {
      spoofed_truth.insert({te.src, te.host_id, te.seq, te.recv_ns});
    }
  }
  m.spoofed_delivered = spoofed_truth.size();
  for (const auto& alert : outputs.spoof_alerts) {
    if (alert.evidence != inference::SpoofEvidence::HopCountShrunk) continue;
    m.spoof_alerts++;
    if (spoofed_truth.count({alert.key.src_addr, alert.key.host_id, alert.seq,
                             alert.recv_time_ns}) > 0) {
      m.spoof_matched++;
    }
  }
  if (m.spoof_alerts > 0) {
    m.spoof_precision = static_cast<double>(m.spoof_matched) /
                        static_cast<double>(m.spoof_alerts);
  }
  if (m.spoofed_delivered > 0) {
    m.spoof_recall = static_cast<double>(m.spoof_matched) /
                     static_cast<double>(m.spoofed_delivered);
  }

  // --- aliases: exact member-set match, judged on the last window ---
  std::set<std::vector<Ipv4>> truth_sets;
  for (const auto& addrs : truth.host_addresses) {
    std::set<Ipv4> unique(addrs.begin(), addrs.end());
    if (unique.size() >= 2) {
      truth_sets.insert(std::vector<Ipv4>(unique.begin(), unique.end()));
    }
  }
  m.alias_truth_sets = truth_sets.size();
  uint64_t last_window = 0;
  for (const auto& s : outputs.alias_sets) {
    last_window = std::max(last_window, s.window_end_ns);
  }
  std::set<std::vector<Ipv4>> reported;
  for (const auto& s : outputs.alias_sets) {
    if (s.window_end_ns == last_window) reported.insert(s.members);
  }
  m.alias_reported_sets = reported.size();
  for (const auto& members : reported) {
    if (truth_sets.count(members) > 0) m.alias_matched_sets++;
  }
  if (m.alias_reported_sets > 0) {
    m.alias_precision = static_cast<double>(m.alias_matched_sets) /
                        static_cast<double>(m.alias_reported_sets);
  }
  if (m.alias_truth_sets > 0) {
    m.alias_recall = static_cast<double>(m.alias_matched_sets) /
                     static_cast<double>(m.alias_truth_sets);
  }

  // --- path events ---
  const auto window_ns = static_cast<uint64_t>(params.path_window_s * 1e9);
  for (const auto& rs : truth.route_shifts) {
    for (size_t hi = 0; hi < truth.host_addresses.size(); ++hi) {
      for (Ipv4 addr : truth.host_addresses[hi]) {
        if (!rs.prefix.contains(addr)) continue;
        m.path_scripted++;
        // Expected hop modes straddling the shift, from the truth log.
        int before = -1, after = -1;
        for (const auto& te : truth.emissions) {
          if (te.host_index != hi || te.src != addr) continue;
          const double t_s = static_cast<double>(te.send_ns) / 1e9;
          if (t_s < rs.start_s) before = te.hops;
          if (t_s >= rs.start_s && after < 0) after = te.hops;
        }
        for (const auto& ev : outputs.path_events) {
          if (ev.kind != inference::PathEventKind::RouteChange) continue;
          if (ev.key.src_addr != addr) continue;
          const auto onset_delta =
              ev.onset_ns > to_ns(rs.start_s)
                  ? ev.onset_ns - to_ns(rs.start_s)
                  : to_ns(rs.start_s) - ev.onset_ns;
          if (onset_delta > 2 * window_ns) continue;
          if (ev.before_mode == before && ev.after_mode == after) {
            m.path_detected++;
            break;
          }
        }
      }
    }
  }
  for (const auto& lb : truth.load_balances) {
    if (lb.host_index >= truth.host_addresses.size()) continue;
    m.path_scripted++;
    for (const auto& ev : outputs.path_events) {
      if (ev.kind != inference::PathEventKind::LoadBalanced) continue;
      bool match_host = false;
      for (Ipv4 addr : truth.host_addresses[lb.host_index]) {
        if (ev.key.src_addr == addr) match_host = true;
      }
      if (!match_host) continue;
      bool has_a = false, has_b = false;
      for (const auto& [hops, share] : ev.modes) {
        if (hops == lb.hop_a) has_a = true;
        if (hops == lb.hop_b) has_b = true;
      }
      if (has_a && has_b) {
        m.path_detected++;
        break;
      }
    }
  }
  if (m.path_scripted > 0) {
    m.path_accuracy = static_cast<double>(m.path_detected) /
                      static_cast<double>(m.path_scripted);
  }
  return m;
}

}  // namespace ihb::simulator
