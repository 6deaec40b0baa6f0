#include <doctest.h>

#include "helpers.hpp"
#include "ihb/wire.hpp"

using namespace ihb;
using namespace ihb::wire;

TEST_CASE("golden fixtures decode and re-encode byte-exactly") {
  const auto fixtures = testing::load_golden_fixtures();
  REQUIRE(fixtures.size() >= 3);
  for (const auto& [name, bytes] : fixtures) {
    CAPTURE(name);
    const auto decoded = decode(bytes);
    REQUIRE(decoded.ok());
    CHECK(encode(decoded.hb) == bytes);
  }
}

TEST_CASE("golden minimal message matches the hand-built struct") {
  Heartbeat hb;
  hb.kind = HeartbeatKind::Ihb;
  hb.host_id = 0;
  hb.rate_uhz = 1;
  hb.orig_ttl = 1;
  hb.timestamp_ns = 0;
  hb.seq = 0;

  const auto fixtures = testing::load_golden_fixtures();
  const auto& minimal = fixtures.front();
  REQUIRE(minimal.first == "minimal");
  CHECK(encode(hb) == minimal.second);
  CHECK(encode(hb).size() == kBareSize);
  CHECK(decode(minimal.second).hb == hb);
}

TEST_CASE("golden fields vector pins endianness") {
  const auto fixtures = testing::load_golden_fixtures();
  const auto& fields = fixtures[1];
  REQUIRE(fields.first == "fields");
  const auto d = decode(fields.second);
  REQUIRE(d.ok());
  CHECK(d.hb.host_id == 0xbeef);
  CHECK(d.hb.rate_uhz == 125000);  // 1/8 pps
  CHECK(d.hb.orig_ttl == 64);
  CHECK(d.hb.timestamp_ns == 0x0123456789abcdefull);
  CHECK(d.hb.seq == 7);
  CHECK(d.hb.pool.pool == PoolKind::Per24);
  CHECK(d.hb.pool.order == OrderKind::Permutation);
  CHECK(d.hb.pool.epoch == 5);
}

TEST_CASE("decode(encode(hb)) == hb") {
  Rng rng(1234);
  for (int i = 0; i < 20000; ++i) {
    const auto hb = testing::random_valid_heartbeat(rng);
    const auto bytes = encode(hb);
    CHECK(bytes.size() == encoded_size(hb.integrity.has_value()));
    const auto decoded = decode(bytes);
    REQUIRE(decoded.ok());
    if (!(decoded.hb == hb)) {
      REQUIRE(decoded.hb == hb);  // report only on failure
    }
  }
}

TEST_CASE("validation errors name the offending field") {
  Heartbeat hb;
  hb.rate_uhz = 0;
  hb.orig_ttl = 1;
  CHECK_THROWS_WITH_AS(encode(hb), "invalid heartbeat field: rate_uhz",
                       ValidationError);

  hb.rate_uhz = 1;
  hb.orig_ttl = 0;
  CHECK_THROWS_AS(encode(hb), ValidationError);

  hb.orig_ttl = 1;
  hb.kind = HeartbeatKind::Lhb;  // LHB requires a local pool
  hb.pool.pool = PoolKind::FullV4;
  CHECK_THROWS_AS(encode(hb), ValidationError);
}

TEST_CASE("decode error classes") {
  CHECK(decode({}).status == DecodeStatus::NotHeartbeat);

  const std::vector<uint8_t> junk{0x00, 0x01, 0x02, 0x03};
  CHECK(decode(junk).status == DecodeStatus::NotHeartbeat);

  auto fixtures = testing::load_golden_fixtures();
  auto bytes = fixtures.front().second;

  SUBCASE("unknown version") {
    bytes[3] = 9;
    CHECK(decode(bytes).status == DecodeStatus::UnsupportedVersion);
  }
  SUBCASE("truncation") {
    bytes.pop_back();
    CHECK(decode(bytes).status == DecodeStatus::Malformed);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK(decode(bytes).status == DecodeStatus::Malformed);
  }
  SUBCASE("magic prefix only") {
    CHECK(decode(std::vector<uint8_t>{0x49, 0x48, 0x42}).status ==
          DecodeStatus::Malformed);
  }
  SUBCASE("invalid field values are malformed, not crashes") {
    bytes[8] = bytes[9] = bytes[10] = bytes[11] = 0;  // rate_uhz = 0
    CHECK(decode(bytes).status == DecodeStatus::Malformed);
  }
}

TEST_CASE("decode is total over arbitrary bytes") {
  Rng rng(99);
  int ok = 0;
  for (int i = 0; i < 50000; ++i) {
    std::vector<uint8_t> buf(rng.next_below(80));
    for (auto& b : buf) b = static_cast<uint8_t>(rng.next_below(256));
    // Give some buffers a valid magic so deeper paths get exercised.
    if (buf.size() >= 4 && rng.next_bool(0.3)) {
      buf[0] = 0x49;
      buf[1] = 0x48;
      buf[2] = 0x42;
      buf[3] = 1;
    }
    const auto r = decode(buf);
    if (r.ok()) ok++;
    CHECK((r.status == DecodeStatus::Ok ||
           r.status == DecodeStatus::NotHeartbeat ||
           r.status == DecodeStatus::Malformed ||
           r.status == DecodeStatus::UnsupportedVersion));
  }
  // Random buffers essentially never form a valid message.
  CHECK(ok <= 1);
}

TEST_CASE("classify decides from transport fields and magic alone") {
  const std::vector<uint8_t> magic{0x49, 0x48, 0x42, 0x01, 0x00};
  const std::vector<uint8_t> not_magic{0x00, 0x48, 0x42};

  DatagramSummary s;
  s.proto = DatagramSummary::Proto::Udp;
  s.udp_dst_port = kDefaultUdpPort;
  s.payload_prefix = magic;
  CHECK(classify(s) == Classification::Heartbeat);

  s.payload_prefix = not_magic;
  CHECK(classify(s) == Classification::NotHeartbeat);

  s.payload_prefix = magic;
  s.udp_dst_port = 5353;
  CHECK(classify(s) == Classification::NotHeartbeat);
  CHECK(classify(s, 5353) == Classification::Heartbeat);  // configurable port

  DatagramSummary tcp;
  tcp.proto = DatagramSummary::Proto::Tcp;
  tcp.payload_prefix = magic;
  CHECK(classify(tcp) == Classification::NotHeartbeat);

  DatagramSummary icmp;
  icmp.proto = DatagramSummary::Proto::Icmp;
  icmp.icmp_type = kIcmpType;
  icmp.icmp_code = kIcmpCode;
  icmp.payload_prefix = magic;
  CHECK(classify(icmp) == Classification::Heartbeat);
  icmp.icmp_type = 8;  // echo request
  CHECK(classify(icmp) == Classification::NotHeartbeat);
}

TEST_CASE("classify accepts every encoded valid message on both transports") {
  Rng rng(77);
  for (int i = 0; i < 2000; ++i) {
    const auto hb = testing::random_valid_heartbeat(rng);
    const auto bytes = encode(hb);
    DatagramSummary udp;
    udp.proto = DatagramSummary::Proto::Udp;
    udp.udp_dst_port = kDefaultUdpPort;
    udp.payload_prefix = std::span<const uint8_t>(bytes.data(), 8);
    CHECK(classify(udp) == Classification::Heartbeat);

    DatagramSummary icmp;
    icmp.proto = DatagramSummary::Proto::Icmp;
    icmp.icmp_type = kIcmpType;
    icmp.icmp_code = kIcmpCode;
    icmp.payload_prefix = std::span<const uint8_t>(bytes.data(), 8);
    CHECK(classify(icmp) == Classification::Heartbeat);
  }
}

TEST_CASE("encoded length depends only on integrity presence") {
  Rng rng(31337);
  for (int i = 0; i < 500; ++i) {
    auto hb = testing::random_valid_heartbeat(rng, false);
    CHECK(encode(hb).size() == kBareSize);
    hb.integrity = IntegrityBlock{};
    CHECK(encode(hb).size() == kFullSize);
  }
}
