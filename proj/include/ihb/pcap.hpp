#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ihb/ip.hpp"
#include "ihb/wire.hpp"

// Minimal classic-pcap (not pcapng) reading and writing, plus just enough
// Ethernet/IPv4 frame handling to carry heartbeats. Link types 1 (EN10MB)
// and 101 (RAW IP) are supported; both microsecond and nanosecond capture
// files are read, nanosecond files are written.
namespace ihb::pcap {

class PcapError : public std::runtime_error {
 public:
  PcapError(const std::string& what, uint64_t offset)
      : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  uint64_t offset() const { return offset_; }

 private:
  uint64_t offset_;
};

inline constexpr uint32_t kLinkEthernet = 1;
inline constexpr uint32_t kLinkRawIp = 101;

struct Packet {
  uint64_t ts_ns = 0;
  std::vector<uint8_t> data;
};

class Reader {
 public:
  explicit Reader(const std::string& path);
  ~Reader();
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  // False at clean end-of-file; throws PcapError on truncation/corruption.
  bool next(Packet& out);
  uint32_t link_type() const { return link_type_; }

 private:
  FILE* file_ = nullptr;
  bool swap_ = false;
  bool nanos_ = false;
  uint32_t link_type_ = 0;
  uint64_t offset_ = 0;
};

class Writer {
 public:
  explicit Writer(const std::string& path, uint32_t link_type = kLinkEthernet);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void write(uint64_t ts_ns, std::span<const uint8_t> frame);

 private:
  FILE* file_ = nullptr;
};

// What the observer needs out of one captured frame.
struct ParsedFrame {
  wire::DatagramSummary::Proto proto = wire::DatagramSummary::Proto::Other;
  Ipv4 src_addr = 0;
  Ipv4 dst_addr = 0;
  uint8_t ttl = 0;
  uint16_t udp_src_port = 0;
  uint16_t udp_dst_port = 0;
  uint8_t icmp_type = 0;
  uint8_t icmp_code = 0;
  std::span<const uint8_t> payload;  // transport payload, borrowed
};

// Fills `out` from an IPv4 frame; false for anything that is not plain
// unfragmented IPv4 (which a heartbeat never is).
bool parse_frame(std::span<const uint8_t> frame, uint32_t link_type,
                 ParsedFrame& out);

uint16_t inet_checksum(std::span<const uint8_t> data);

// Frame builders used by the simulator's pcap export and by test fixtures.
std::vector<uint8_t> build_udp_frame(Ipv4 src, Ipv4 dst, uint8_t ttl,
                                     uint16_t sport, uint16_t dport,
                                     std::span<const uint8_t> payload);
std::vector<uint8_t> build_icmp_frame(Ipv4 src, Ipv4 dst, uint8_t ttl,
                                      std::span<const uint8_t> payload);

}  // namespace ihb::pcap
