#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ihb::wire {

// Heartbeat wire format, version 1. Fixed layout, all multi-byte fields
// big-endian:
//
//   offset  size  field
//   0       3     magic "IHB" (0x49 0x48 0x42)
//   3       1     version (1)
//   4       1     kind (0 = IHB, 1 = LHB)
//   5       2     host_id
//   7       1     orig_ttl
//   8       4     rate_uhz (micro-heartbeats per second; 1 pps = 1,000,000)
//   12      4     seq
//   16      8     timestamp_ns (sender clock, ns since Unix epoch)
//   24      4     pool descriptor: pool kind (4 bits) | order kind (4 bits)
//                 | permutation epoch (24 bits)
//   28      1     integrity flag (0 or 1)
//   29      38    integrity block, present iff flag = 1:
//                 chain_epoch (2) | key_index (4) | mac (16) | disclosed_key (16)
//
// Total: 29 bytes bare, 67 with integrity. The layout is fixed-size so a
// capture point can classify a datagram from its first bytes without
// parsing, and decoding never allocates.

inline constexpr std::array<uint8_t, 3> kMagic = {0x49, 0x48, 0x42};
inline constexpr uint8_t kVersion = 1;
inline constexpr size_t kBareSize = 29;
inline constexpr size_t kIntegrityBlockSize = 38;
inline constexpr size_t kFullSize = kBareSize + kIntegrityBlockSize;

// ICMP encapsulation: RFC 4727 experimental type, deployable without a new
// assignment. UDP encapsulation: configurable port.
inline constexpr uint8_t kIcmpType = 253;
inline constexpr uint8_t kIcmpCode = 0;
inline constexpr uint16_t kDefaultUdpPort = 48000;

enum class HeartbeatKind : uint8_t { Ihb = 0, Lhb = 1 };
enum class PoolKind : uint8_t { FullV4 = 0, Per24 = 1, Local = 2 };
enum class OrderKind : uint8_t { Random = 0, Permutation = 1 };

struct PoolDescriptor {
  PoolKind pool = PoolKind::FullV4;
  OrderKind order = OrderKind::Random;
  uint32_t epoch = 0;  // 24-bit on the wire

  bool operator==(const PoolDescriptor&) const = default;
};

struct IntegrityBlock {
  uint16_t chain_epoch = 0;
  uint32_t key_index = 0;
  std::array<uint8_t, 16> mac{};
  std::array<uint8_t, 16> disclosed_key{};

  bool operator==(const IntegrityBlock&) const = default;
};

struct Heartbeat {
  uint8_t version = kVersion;
  HeartbeatKind kind = HeartbeatKind::Ihb;
  uint16_t host_id = 0;
  uint32_t rate_uhz = 0;
  uint8_t orig_ttl = 0;
  uint64_t timestamp_ns = 0;
  PoolDescriptor pool;
  uint32_t seq = 0;
  std::optional<IntegrityBlock> integrity;

  bool operator==(const Heartbeat&) const = default;
};

// Transport a datagram was (or is to be) carried on.
struct TransportKind {
  enum class Proto : uint8_t { IcmpExperimental = 0, UdpPort = 1 };
  Proto proto = Proto::UdpPort;
  uint16_t udp_port = kDefaultUdpPort;  // meaningful for UdpPort only

  static TransportKind icmp() { return {Proto::IcmpExperimental, 0}; }
  static TransportKind udp(uint16_t port = kDefaultUdpPort) {
    return {Proto::UdpPort, port};
  }
  bool operator==(const TransportKind&) const = default;
};

// An arrival record as a capture point sees it. arrival_ttl > orig_ttl is
// not a decode error: it cannot happen for honest traffic, so it is left
// intact for the spoofing analytics to see.
struct ObservedHeartbeat {
  uint64_t recv_time_ns = 0;
  uint32_t src_addr = 0;
  uint32_t dst_addr = 0;
  uint8_t arrival_ttl = 0;
  TransportKind transport;
  Heartbeat body;

  bool operator==(const ObservedHeartbeat&) const = default;
};

// Returns the offending field name, or nullptr when hb satisfies the type
// invariants (version = 1, rate > 0, ttl >= 1, LHB implies local pool).
const char* validate(const Heartbeat& hb);

class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const char* field)
      : std::invalid_argument(std::string("invalid heartbeat field: ") + field),
        field_(field) {}
  const char* field() const { return field_; }

 private:
  const char* field_;
};

// Canonical encoding. Throws ValidationError if hb violates an invariant.
std::vector<uint8_t> encode(const Heartbeat& hb);

// Encoded size for a message with/without an integrity block.
inline constexpr size_t encoded_size(bool with_integrity) {
  return with_integrity ? kFullSize : kBareSize;
}

enum class DecodeStatus : uint8_t {
  Ok,
  NotHeartbeat,        // magic missing
  Malformed,           // truncated, trailing bytes, or invalid field values
  UnsupportedVersion,  // magic present, version != 1
};

struct DecodeResult {
  DecodeStatus status = DecodeStatus::Malformed;
  Heartbeat hb;  // valid iff status == Ok

  bool ok() const { return status == DecodeStatus::Ok; }
};

// Strict decoder; total over arbitrary input, never throws.
DecodeResult decode(std::span<const uint8_t> bytes);

// What a capture filter sees before committing to a full parse: transport
// header fields plus at most the first 8 payload bytes.
struct DatagramSummary {
  enum class Proto : uint8_t { Udp, Tcp, Icmp, Other };
  Proto proto = Proto::Other;
  uint8_t icmp_type = 0;
  uint8_t icmp_code = 0;
  uint16_t udp_dst_port = 0;
  std::span<const uint8_t> payload_prefix;  // first <= 8 bytes
};

enum class Classification : uint8_t { Heartbeat, NotHeartbeat };

// O(1) filter decision; never parses past the payload prefix.
Classification classify(const DatagramSummary& raw,
                        uint16_t udp_port = kDefaultUdpPort);

}  // namespace ihb::wire
