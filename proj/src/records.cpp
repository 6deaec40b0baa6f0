#include "ihb/records.hpp"

#include <array>

namespace ihb::records {

namespace {

int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw SchemaError("bad hex digit");
}

std::array<uint8_t, 16> hex16(const std::string& s) {
  const auto bytes = hex_decode(s);
  if (bytes.size() != 16) throw SchemaError("expected 16 hex-encoded bytes");
  std::array<uint8_t, 16> out;
  std::copy(bytes.begin(), bytes.end(), out.begin());
  return out;
}

Ipv4 addr_field(const json& j, const char* field) {
  const auto addr = parse_ipv4(j.at(field).get<std::string>());
  if (!addr) throw SchemaError(std::string("bad address in field ") + field);
  return *addr;
}

template <typename T>
T enum_field(const json& j, const char* field,
             std::initializer_list<std::pair<const char*, T>> table) {
  const auto s = j.at(field).get<std::string>();
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw SchemaError(std::string("bad value for field ") + field + ": " + s);
}

}  // namespace

std::string hex_encode(std::span<const uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::vector<uint8_t> hex_decode(const std::string& hex) {
  if (hex.size() % 2 != 0) throw SchemaError("odd-length hex string");
  std::vector<uint8_t> out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(
        static_cast<uint8_t>(hex_nibble(hex[i]) << 4 | hex_nibble(hex[i + 1])));
  }
  return out;
}

json heartbeat_to_json(const wire::Heartbeat& hb) {
  json j{
      {"version", hb.version},
      {"kind", hb.kind == wire::HeartbeatKind::Lhb ? "lhb" : "ihb"},
      {"host_id", hb.host_id},
      {"rate_uhz", hb.rate_uhz},
      {"orig_ttl", hb.orig_ttl},
      {"timestamp_ns", hb.timestamp_ns},
      {"pool", hb.pool.pool == wire::PoolKind::FullV4  ? "full_v4"
               : hb.pool.pool == wire::PoolKind::Per24 ? "per24"
                                                       : "local"},
      {"order", hb.pool.order == wire::OrderKind::Random ? "random"
                                                         : "permutation"},
      {"epoch", hb.pool.epoch},
      {"seq", hb.seq},
  };
  if (hb.integrity) {
    j["integrity"] = json{
        {"chain_epoch", hb.integrity->chain_epoch},
        {"key_index", hb.integrity->key_index},
        {"mac", hex_encode(hb.integrity->mac)},
        {"disclosed_key", hex_encode(hb.integrity->disclosed_key)},
    };
  }
  return j;
}

wire::Heartbeat heartbeat_from_json(const json& j) {
  wire::Heartbeat hb;
  hb.version = j.at("version").get<uint8_t>();
  hb.kind = enum_field<wire::HeartbeatKind>(
      j, "kind",
      {{"ihb", wire::HeartbeatKind::Ihb}, {"lhb", wire::HeartbeatKind::Lhb}});
  hb.host_id = j.at("host_id").get<uint16_t>();
  hb.rate_uhz = j.at("rate_uhz").get<uint32_t>();
  hb.orig_ttl = j.at("orig_ttl").get<uint8_t>();
  hb.timestamp_ns = j.at("timestamp_ns").get<uint64_t>();
  hb.pool.pool = enum_field<wire::PoolKind>(j, "pool",
                                            {{"full_v4", wire::PoolKind::FullV4},
                                             {"per24", wire::PoolKind::Per24},
                                             {"local", wire::PoolKind::Local}});
  hb.pool.order = enum_field<wire::OrderKind>(
      j, "order", {{"random", wire::OrderKind::Random},
                   {"permutation", wire::OrderKind::Permutation}});
  hb.pool.epoch = j.at("epoch").get<uint32_t>();
  hb.seq = j.at("seq").get<uint32_t>();
  if (j.contains("integrity")) {
    const json& ij = j.at("integrity");
    wire::IntegrityBlock block;
    block.chain_epoch = ij.at("chain_epoch").get<uint16_t>();
    block.key_index = ij.at("key_index").get<uint32_t>();
    block.mac = hex16(ij.at("mac").get<std::string>());
    block.disclosed_key = hex16(ij.at("disclosed_key").get<std::string>());
    hb.integrity = block;
  }
  return hb;
}

std::string transport_to_string(const wire::TransportKind& t) {
  if (t.proto == wire::TransportKind::Proto::IcmpExperimental) return "icmp";
  return "udp:" + std::to_string(t.udp_port);
}

wire::TransportKind transport_from_string(const std::string& s) {
  if (s == "icmp") return wire::TransportKind::icmp();
  if (s.rfind("udp:", 0) == 0) {
    const int port = std::stoi(s.substr(4));
    if (port < 1 || port > 65535) throw SchemaError("bad udp port: " + s);
    return wire::TransportKind::udp(static_cast<uint16_t>(port));
  }
  throw SchemaError("bad transport: " + s);
}

json observed_to_json(const wire::ObservedHeartbeat& obs) {
  return json{
      {"recv_ns", obs.recv_time_ns},
      {"src", format_ipv4(obs.src_addr)},
      {"dst", format_ipv4(obs.dst_addr)},
      {"arrival_ttl", obs.arrival_ttl},
      {"transport", transport_to_string(obs.transport)},
      {"hb", heartbeat_to_json(obs.body)},
  };
}

wire::ObservedHeartbeat observed_from_json(const json& j) {
  wire::ObservedHeartbeat obs;
  obs.recv_time_ns = j.at("recv_ns").get<uint64_t>();
  obs.src_addr = addr_field(j, "src");
  obs.dst_addr = addr_field(j, "dst");
  obs.arrival_ttl = j.at("arrival_ttl").get<uint8_t>();
  obs.transport = transport_from_string(j.at("transport").get<std::string>());
  obs.body = heartbeat_from_json(j.at("hb"));
  return obs;
}

json emission_to_json(const sender::Emission& e) {
  return json{
      {"send_ns", e.send_time_ns},
      {"src", format_ipv4(e.src_addr)},
      {"dst", format_ipv4(e.dst_addr)},
      {"ttl", e.ttl},
      {"transport", transport_to_string(e.transport)},
      {"iface", e.iface_index},
      {"hb", heartbeat_to_json(e.heartbeat)},
  };
}

sender::Emission emission_from_json(const json& j) {
  sender::Emission e;
  e.send_time_ns = j.at("send_ns").get<uint64_t>();
  e.src_addr = addr_field(j, "src");
  e.dst_addr = addr_field(j, "dst");
  e.ttl = j.at("ttl").get<uint8_t>();
  e.transport = transport_from_string(j.at("transport").get<std::string>());
  e.iface_index = j.at("iface").get<uint32_t>();
  e.heartbeat = heartbeat_from_json(j.at("hb"));
  return e;
}

namespace {

json source_key_to_json(const inference::SourceKey& k) {
  return json{{"src", format_ipv4(k.src_addr)}, {"host_id", k.host_id}};
}

inference::SourceKey source_key_from_json(const json& j) {
  return inference::SourceKey{addr_field(j, "src"),
                              j.at("host_id").get<uint16_t>()};
}

}  // namespace

json report_to_json(const Report& r) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, inference::OutageAssessment>) {
          return json{
              {"type", "outage"},
              {"target", format_prefix(v.target)},
              {"now_ns", v.now_ns},
              {"silence_s", v.silence_s},
              {"p_consistent", v.p_consistent},
              {"threshold", v.threshold},
              {"members", v.member_count},
              {"verdict", v.verdict == inference::OutageVerdict::SuspectedOutage
                              ? "suspected_outage"
                              : "reachable"},
          };
        } else if constexpr (std::is_same_v<T, inference::PathChangeEvent>) {
          json j{
              {"type", "path_event"},
              {"kind", v.kind == inference::PathEventKind::RouteChange
                           ? "route_change"
                       : v.kind == inference::PathEventKind::LoadBalanced
                           ? "load_balanced"
                           : "shared_fate_group"},
              {"onset_ns", v.onset_ns},
              {"window_s", v.window_s},
              {"delta_sign", v.delta_sign},
          };
          if (v.kind != inference::PathEventKind::SharedFateGroup) {
            j["key"] = source_key_to_json(v.key);
          }
          if (v.kind == inference::PathEventKind::RouteChange) {
            j["before_mode"] = v.before_mode;
            j["after_mode"] = v.after_mode;
          }
          if (!v.modes.empty()) {
            json modes = json::array();
            for (const auto& [hops, share] : v.modes) {
              modes.push_back(json{{"hops", hops}, {"share", share}});
            }
            j["modes"] = modes;
          }
          if (!v.members.empty()) {
            json members = json::array();
            for (const auto& m : v.members) members.push_back(source_key_to_json(m));
            j["members"] = members;
          }
          return j;
        } else if constexpr (std::is_same_v<T, inference::SpoofAlert>) {
          return json{
              {"type", "spoof"},
              {"evidence", v.evidence == inference::SpoofEvidence::HopCountShrunk
                               ? "hop_count_shrunk"
                               : "meta_conflict"},
              {"key", source_key_to_json(v.key)},
              {"recv_ns", v.recv_time_ns},
              {"seq", v.seq},
              {"observed_hops", v.observed_hops},
              {"historical_min", v.historical_min},
              {"detail", v.detail},
          };
        } else if constexpr (std::is_same_v<T, inference::AliasCandidateSet>) {
          json members = json::array();
          for (Ipv4 addr : v.members) members.push_back(format_ipv4(addr));
          return json{
              {"type", "alias"},
              {"host_id", v.host_id},
              {"members", members},
              {"tier", v.tier == inference::AliasTier::RotationConfirmed
                           ? "rotation_confirmed"
                           : "candidate"},
              {"window_start_ns", v.window_start_ns},
              {"window_end_ns", v.window_end_ns},
          };
        } else if constexpr (std::is_same_v<T, inference::NatEstimate>) {
          return json{
              {"type", "nat"},
              {"src", format_ipv4(v.src_addr)},
              {"distinct_hostids", v.distinct_hostids},
              {"estimate", v.estimate},
              {"window_start_ns", v.window_start_ns},
              {"window_end_ns", v.window_end_ns},
          };
        } else {
          static_assert(std::is_same_v<T, inference::FaultLocalization>);
          return json{
              {"type", "localize"},
              {"verdict", inference::to_string(v.verdict)},
              {"evidence", v.evidence},
          };
        }
      },
      r);
}

Report report_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "outage") {
    inference::OutageAssessment v;
    const auto target = parse_prefix(j.at("target").get<std::string>());
    if (!target) throw SchemaError("bad outage target prefix");
    v.target = *target;
    v.now_ns = j.at("now_ns").get<uint64_t>();
    v.silence_s = j.at("silence_s").get<double>();
    v.p_consistent = j.at("p_consistent").get<double>();
    v.threshold = j.at("threshold").get<double>();
    v.member_count = j.at("members").get<uint32_t>();
    v.verdict = j.at("verdict").get<std::string>() == "suspected_outage"
                    ? inference::OutageVerdict::SuspectedOutage
                    : inference::OutageVerdict::Reachable;
    return v;
  }
  if (type == "path_event") {
    inference::PathChangeEvent v;
    const auto kind = j.at("kind").get<std::string>();
    v.kind = kind == "route_change" ? inference::PathEventKind::RouteChange
             : kind == "load_balanced"
                 ? inference::PathEventKind::LoadBalanced
                 : inference::PathEventKind::SharedFateGroup;
    v.onset_ns = j.at("onset_ns").get<uint64_t>();
    v.window_s = j.at("window_s").get<double>();
    v.delta_sign = j.at("delta_sign").get<int>();
    if (j.contains("key")) v.key = source_key_from_json(j.at("key"));
    if (j.contains("before_mode")) v.before_mode = j.at("before_mode").get<int>();
    if (j.contains("after_mode")) v.after_mode = j.at("after_mode").get<int>();
    if (j.contains("modes")) {
      for (const auto& m : j.at("modes")) {
        v.modes.emplace_back(m.at("hops").get<int>(),
                             m.at("share").get<double>());
      }
    }
    if (j.contains("members")) {
      for (const auto& m : j.at("members")) {
        v.members.push_back(source_key_from_json(m));
      }
    }
    return v;
  }
  if (type == "spoof") {
    inference::SpoofAlert v;
    v.evidence = j.at("evidence").get<std::string>() == "hop_count_shrunk"
                     ? inference::SpoofEvidence::HopCountShrunk
                     : inference::SpoofEvidence::MetaConflict;
    v.key = source_key_from_json(j.at("key"));
    v.recv_time_ns = j.at("recv_ns").get<uint64_t>();
    v.seq = j.at("seq").get<uint32_t>();
    v.observed_hops = j.at("observed_hops").get<int>();
    v.historical_min = j.at("historical_min").get<int>();
    v.detail = j.at("detail").get<std::string>();
    return v;
  }
  if (type == "alias") {
    inference::AliasCandidateSet v;
    v.host_id = j.at("host_id").get<uint16_t>();
    for (const auto& m : j.at("members")) {
      const auto addr = parse_ipv4(m.get<std::string>());
      if (!addr) throw SchemaError("bad alias member address");
      v.members.push_back(*addr);
    }
    v.tier = j.at("tier").get<std::string>() == "rotation_confirmed"
                 ? inference::AliasTier::RotationConfirmed
                 : inference::AliasTier::Candidate;
    v.window_start_ns = j.at("window_start_ns").get<uint64_t>();
    v.window_end_ns = j.at("window_end_ns").get<uint64_t>();
    return v;
  }
  if (type == "nat") {
    inference::NatEstimate v;
    v.src_addr = addr_field(j, "src");
    v.distinct_hostids = j.at("distinct_hostids").get<uint32_t>();
    v.estimate = j.at("estimate").get<double>();
    v.window_start_ns = j.at("window_start_ns").get<uint64_t>();
    v.window_end_ns = j.at("window_end_ns").get<uint64_t>();
    return v;
  }
  if (type == "localize") {
    inference::FaultLocalization v;
    const auto verdict = j.at("verdict").get<std::string>();
    if (verdict == "local_lan") v.verdict = inference::FaultSite::LocalLan;
    else if (verdict == "access_link") v.verdict = inference::FaultSite::AccessLink;
    else if (verdict == "provider") v.verdict = inference::FaultSite::Provider;
    else if (verdict == "remote_network") v.verdict = inference::FaultSite::RemoteNetwork;
    else if (verdict == "healthy") v.verdict = inference::FaultSite::Healthy;
    else throw SchemaError("bad localize verdict: " + verdict);
    v.evidence = j.at("evidence").get<std::string>();
    return v;
  }
  throw SchemaError("unknown report type: " + type);
}

JsonlWriter::JsonlWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
}

void JsonlWriter::write(const json& j) { out_ << j.dump() << '\n'; }

void for_each_jsonl(const std::string& path,
                    const std::function<void(const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw SchemaError(path + ":" + std::to_string(lineno) +
                        ": invalid json");
    }
    fn(j);
  }
}

}  // namespace ihb::records
