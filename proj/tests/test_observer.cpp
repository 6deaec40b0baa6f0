#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>
#include <thread>

#include "helpers.hpp"
#include "ihb/config.hpp"
#include "ihb/observer.hpp"
#include "ihb/pcap.hpp"

using namespace ihb;
using namespace ihb::observer;

namespace {

const Prefix kLens = *parse_prefix("10.0.0.0/8");

StoreConfig small_store() {
  StoreConfig cfg;
  cfg.lens = kLens;
  return cfg;
}

wire::ObservedHeartbeat make_obs(const char* src, uint16_t host_id,
                                 uint32_t seq, uint64_t recv_s,
                                 uint32_t rate_uhz = 1000000,
                                 uint8_t orig_ttl = 64,
                                 uint8_t arrival_ttl = 52) {
  wire::ObservedHeartbeat obs;
  obs.recv_time_ns = recv_s * 1000000000ull;
  obs.src_addr = *parse_ipv4(src);
  obs.dst_addr = *parse_ipv4("10.20.30.40");
  obs.arrival_ttl = arrival_ttl;
  obs.transport = wire::TransportKind::udp();
  obs.body.kind = wire::HeartbeatKind::Ihb;
  obs.body.host_id = host_id;
  obs.body.rate_uhz = rate_uhz;
  obs.body.orig_ttl = orig_ttl;
  obs.body.timestamp_ns = obs.recv_time_ns - 60000000;  // 60 ms in flight
  obs.body.seq = seq;
  return obs;
}

}  // namespace

TEST_CASE("first arrival creates state without anomalies") {
  StateStore store(small_store());
  const auto anomalies = store.ingest(make_obs("1.2.3.4", 7, 0, 100));
  CHECK(anomalies.empty());
  const auto snap = store.snapshot();
  REQUIRE(snap.states.size() == 1);
  CHECK(snap.states[0].key.src_addr == *parse_ipv4("1.2.3.4"));
  CHECK(snap.states[0].first_seen_ns == snap.states[0].last_seen_ns);
  CHECK(snap.states[0].declared_rate_uhz == 1000000);
  CHECK(snap.states[0].hop_min == 12);
  CHECK(snap.states[0].ihb_count == 1);
}

TEST_CASE("declared rate change raises a conflict") {
  StateStore store(small_store());
  store.ingest(make_obs("1.2.3.4", 7, 0, 100, 1000000));
  const auto anomalies = store.ingest(make_obs("1.2.3.4", 7, 1, 101, 125000));
  REQUIRE(anomalies.size() == 1);
  CHECK(anomalies[0].kind == AnomalyKind::DeclaredRateConflict);
  CHECK(store.snapshot().states[0].rate_conflicts == 1);
}

TEST_CASE("same seq with a different originating TTL is duplicate + ttl jump") {
  StateStore store(small_store());
  store.ingest(make_obs("1.2.3.4", 7, 5, 100, 1000000, 64, 52));
  const auto anomalies =
      store.ingest(make_obs("1.2.3.4", 7, 5, 100, 1000000, 255, 250));
  REQUIRE(anomalies.size() == 2);
  std::set<AnomalyKind> kinds{anomalies[0].kind, anomalies[1].kind};
  CHECK(kinds.count(AnomalyKind::DuplicateSeq) == 1);
  CHECK(kinds.count(AnomalyKind::TtlJump) == 1);
}

TEST_CASE("pair echoes are recognized, replays are not") {
  StateStore store(small_store());
  auto first = make_obs("1.2.3.4", 7, 5, 100);
  store.ingest(first);

  SUBCASE("identical twin within the pair window is an echo") {
    auto twin = first;
    twin.recv_time_ns += 40000;  // 40 us later
    CHECK(store.ingest(twin).empty());
    CHECK(store.snapshot().states[0].pair_echoes == 1);
  }
  SUBCASE("identical copy far outside the window is a duplicate") {
    auto replay = first;
    replay.recv_time_ns += 5000000000ull;  // 5 s later
    const auto anomalies = store.ingest(replay);
    REQUIRE(anomalies.size() == 1);
    CHECK(anomalies[0].kind == AnomalyKind::DuplicateSeq);
  }
}

TEST_CASE("sequence regression is flagged") {
  StateStore store(small_store());
  store.ingest(make_obs("1.2.3.4", 7, 500, 100));
  store.ingest(make_obs("1.2.3.4", 7, 501, 101));
  const auto anomalies = store.ingest(make_obs("1.2.3.4", 7, 3, 102));
  REQUIRE(anomalies.size() == 1);
  CHECK(anomalies[0].kind == AnomalyKind::SeqRegression);
}

TEST_CASE("destinations outside the lens are rejected") {
  StateStore store(small_store());
  auto obs = make_obs("1.2.3.4", 7, 0, 100);
  obs.dst_addr = *parse_ipv4("172.16.0.1");
  CHECK_THROWS_AS(store.ingest(obs), OutOfLensError);
  CHECK(store.ingested() == 0);
}

TEST_CASE("two HostIDs behind one address are two states (NAT signal)") {
  StateStore store(small_store());
  store.ingest(make_obs("9.9.9.9", 1, 0, 100));
  store.ingest(make_obs("9.9.9.9", 2, 0, 100));
  CHECK(store.snapshot().states.size() == 2);
}

TEST_CASE("conservation: every ingested arrival is accounted for") {
  StoreConfig cfg = small_store();
  cfg.ring_capacity = 8;
  cfg.capacity = 4;
  StateStore store(cfg);
  Rng rng(6);
  uint64_t sent = 0;
  for (int i = 0; i < 500; ++i) {
    const auto src = "1.2.3." + std::to_string(rng.next_below(12));
    store.ingest(make_obs(src.c_str(), 1, static_cast<uint32_t>(i),
                          100 + static_cast<uint64_t>(i)));
    sent++;
  }
  const auto snap = store.snapshot();
  uint64_t accounted = snap.evicted_state_arrivals;
  for (const auto& st : snap.states) {
    accounted += st.history.size() + st.ring_evictions;
  }
  CHECK(accounted == sent);
  CHECK(snap.ingested == sent);
  CHECK(snap.states.size() <= 4);
  CHECK(snap.evicted_states > 0);
}

TEST_CASE("ingesting the same log twice yields identical snapshots") {
  std::vector<wire::ObservedHeartbeat> log;
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    log.push_back(make_obs(
        ("1.1.1." + std::to_string(rng.next_below(6))).c_str(),
        static_cast<uint16_t>(rng.next_below(3)), static_cast<uint32_t>(i),
        100 + static_cast<uint64_t>(i), 1000000,
        static_cast<uint8_t>(60 + rng.next_below(5)), 52));
  }
  StateStore a(small_store()), b(small_store());
  for (const auto& obs : log) {
    a.ingest(obs);
    b.ingest(obs);
  }
  CHECK(config::snapshot_to_json(a.snapshot()) ==
        config::snapshot_to_json(b.snapshot()));
}

TEST_CASE("snapshots are isolated from later ingestion") {
  StateStore store(small_store());
  store.ingest(make_obs("1.2.3.4", 7, 0, 100));
  const auto snap = store.snapshot();
  store.ingest(make_obs("1.2.3.4", 7, 1, 101));
  store.ingest(make_obs("5.6.7.8", 9, 0, 102));
  CHECK(snap.states.size() == 1);
  CHECK(snap.states[0].history.size() == 1);
  CHECK(store.snapshot().states.size() == 2);

  StateStore empty(small_store());
  CHECK(empty.snapshot().states.empty());
}

TEST_CASE("snapshots stay consistent under a concurrent writer") {
  StateStore store(small_store());
  std::atomic<bool> done{false};
  std::thread writer([&] {
    Rng rng(17);
    for (int i = 0; i < 20000; ++i) {
      const auto src = "1.2." + std::to_string(rng.next_below(20)) + ".9";
      store.ingest(make_obs(src.c_str(), 1, static_cast<uint32_t>(i),
                            100 + static_cast<uint64_t>(i)));
    }
    done.store(true);
  });
  uint64_t prev_ingested = 0;
  while (!done.load()) {
    const auto snap = store.snapshot();
    uint64_t accounted = snap.evicted_state_arrivals;
    for (const auto& st : snap.states) {
      accounted += st.history.size() + st.ring_evictions;
    }
    CHECK(accounted == snap.ingested);      // internally consistent
    CHECK(snap.ingested >= prev_ingested);  // monotone across snapshots
    prev_ingested = snap.ingested;
  }
  writer.join();
  CHECK(store.ingested() == 20000);
}

TEST_CASE("snapshot round-trips through the on-disk format") {
  StateStore store(small_store());
  for (int i = 0; i < 50; ++i) {
    store.ingest(make_obs("1.2.3.4", 7, static_cast<uint32_t>(i),
                          100 + static_cast<uint64_t>(i)));
  }
  const auto snap = store.snapshot();
  const auto path = std::filesystem::temp_directory_path() / "ihb_snap.json";
  config::save_snapshot(snap, path.string());
  const auto loaded = config::load_snapshot(path.string());
  CHECK(config::snapshot_to_json(loaded) == config::snapshot_to_json(snap));
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// pcap ingestion
// ---------------------------------------------------------------------------

namespace {

std::vector<uint8_t> heartbeat_frame(uint64_t idx, Ipv4 dst) {
  wire::Heartbeat hb;
  hb.host_id = 0x42;
  hb.rate_uhz = 1000000;
  hb.orig_ttl = 64;
  hb.timestamp_ns = idx * 1000;
  hb.seq = static_cast<uint32_t>(idx);
  const auto payload = wire::encode(hb);
  return pcap::build_udp_frame(*parse_ipv4("1.2.3.4"), dst, 52, 48000,
                               wire::kDefaultUdpPort, payload);
}

}  // namespace

TEST_CASE("pcap fixture with mixed traffic yields exactly the heartbeats") {
  const auto path = std::filesystem::temp_directory_path() / "ihb_mixed.pcap";
  {
    pcap::Writer w(path.string());
    uint64_t ts = 1000000000ull;
    for (int i = 0; i < 10; ++i) {
      w.write(ts, heartbeat_frame(static_cast<uint64_t>(i),
                                  *parse_ipv4("10.0.0.99")));
      ts += 1000000;
    }
    // Three non-heartbeats: wrong port, bad magic, and a TCP-protocol frame.
    const std::vector<uint8_t> noise{0xde, 0xad, 0xbe, 0xef, 0x00, 0x00,
                                     0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
    w.write(ts, pcap::build_udp_frame(*parse_ipv4("2.2.2.2"),
                                      *parse_ipv4("10.0.0.1"), 60, 1, 53,
                                      noise));
    auto bad_magic = heartbeat_frame(99, *parse_ipv4("10.0.0.99"));
    bad_magic[14 + 20 + 8] = 0x00;  // first payload byte
    w.write(ts + 1, bad_magic);
    auto tcp = pcap::build_udp_frame(*parse_ipv4("3.3.3.3"),
                                     *parse_ipv4("10.0.0.2"), 60, 1234,
                                     wire::kDefaultUdpPort, noise);
    tcp[14 + 9] = 6;  // rewrite protocol; checksum irrelevant to the parser
    w.write(ts + 2, tcp);
  }

  std::vector<wire::ObservedHeartbeat> got;
  const auto stats = load_pcap(path.string(), kLens,
                               [&](const wire::ObservedHeartbeat& o) {
                                 got.push_back(o);
                               });
  CHECK(stats.packets == 13);
  CHECK(stats.yielded == 10);
  CHECK(stats.non_heartbeat == 3);
  CHECK(stats.malformed == 0);
  REQUIRE(got.size() == 10);
  CHECK(got[0].arrival_ttl == 52);
  CHECK(got[0].src_addr == *parse_ipv4("1.2.3.4"));
  CHECK(got[0].dst_addr == *parse_ipv4("10.0.0.99"));
  CHECK(got[0].body.seq == 0);
  std::filesystem::remove(path);
}

TEST_CASE("empty pcap yields an empty stream") {
  const auto path = std::filesystem::temp_directory_path() / "ihb_empty.pcap";
  { pcap::Writer w(path.string()); }
  const auto stats =
      load_pcap(path.string(), kLens, [](const wire::ObservedHeartbeat&) {});
  CHECK(stats.packets == 0);
  CHECK(stats.yielded == 0);
  std::filesystem::remove(path);
}

TEST_CASE("truncated heartbeat payloads count as malformed") {
  const auto path = std::filesystem::temp_directory_path() / "ihb_trunc.pcap";
  {
    pcap::Writer w(path.string());
    auto frame = heartbeat_frame(0, *parse_ipv4("10.0.0.99"));
    frame.resize(frame.size() - 4);  // cut the heartbeat short
    // Fix the IP total length so the frame itself parses.
    const uint16_t new_total = static_cast<uint16_t>(frame.size() - 14);
    frame[14 + 2] = static_cast<uint8_t>(new_total >> 8);
    frame[14 + 3] = static_cast<uint8_t>(new_total);
    w.write(1000, frame);
  }
  uint64_t yielded = 0;
  const auto stats = load_pcap(path.string(), kLens,
                               [&](const wire::ObservedHeartbeat&) {
                                 yielded++;
                               });
  CHECK(yielded == 0);
  CHECK(stats.malformed == 1);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt pcap headers raise an error with the offset") {
  const auto path = std::filesystem::temp_directory_path() / "ihb_corrupt.pcap";
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a capture file";
  }
  CHECK_THROWS_AS(
      load_pcap(path.string(), kLens, [](const wire::ObservedHeartbeat&) {}),
      pcap::PcapError);
  std::filesystem::remove(path);
}

TEST_CASE("icmp-encapsulated heartbeats parse from pcap too") {
  const auto path = std::filesystem::temp_directory_path() / "ihb_icmp.pcap";
  {
    pcap::Writer w(path.string());
    wire::Heartbeat hb;
    hb.host_id = 5;
    hb.rate_uhz = 125000;
    hb.orig_ttl = 64;
    hb.seq = 0;
    const auto payload = wire::encode(hb);
    w.write(1000, pcap::build_icmp_frame(*parse_ipv4("7.7.7.7"),
                                         *parse_ipv4("10.1.1.1"), 55,
                                         payload));
  }
  std::vector<wire::ObservedHeartbeat> got;
  load_pcap(path.string(), kLens,
            [&](const wire::ObservedHeartbeat& o) { got.push_back(o); });
  REQUIRE(got.size() == 1);
  CHECK(got[0].transport.proto == wire::TransportKind::Proto::IcmpExperimental);
  CHECK(got[0].arrival_ttl == 55);
  CHECK(got[0].body.rate_uhz == 125000);
  std::filesystem::remove(path);
}
