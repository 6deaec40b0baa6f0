#include "ihb/pcap.hpp"

#include <algorithm>
#include <cstring>

namespace ihb::pcap {

namespace {

constexpr uint32_t kMagicMicros = 0xa1b2c3d4;
constexpr uint32_t kMagicNanos = 0xa1b23c4d;

uint32_t swap32(uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

uint16_t rd16be(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] << 8 | p[1]);
}

uint32_t rd32be(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
         static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}

void wr16be(uint8_t* p, uint16_t v) {
  p[0] = static_cast<uint8_t>(v >> 8);
  p[1] = static_cast<uint8_t>(v);
}

void wr32be(uint8_t* p, uint32_t v) {
  p[0] = static_cast<uint8_t>(v >> 24);
  p[1] = static_cast<uint8_t>(v >> 16);
  p[2] = static_cast<uint8_t>(v >> 8);
  p[3] = static_cast<uint8_t>(v);
}

}  // namespace

Reader::Reader(const std::string& path) {
  file_ = std::fopen(path.c_str(), "rb");
  if (!file_) throw PcapError("cannot open pcap file " + path, 0);
  uint8_t header[24];
  if (std::fread(header, 1, sizeof(header), file_) != sizeof(header)) {
    std::fclose(file_);
    file_ = nullptr;
    throw PcapError("short pcap global header", 0);
  }
  uint32_t magic;
  std::memcpy(&magic, header, 4);
  if (magic == kMagicMicros || magic == kMagicNanos) {
    swap_ = false;
  } else if (swap32(magic) == kMagicMicros || swap32(magic) == kMagicNanos) {
    swap_ = true;
    magic = swap32(magic);
  } else {
    std::fclose(file_);
    file_ = nullptr;
    throw PcapError("bad pcap magic", 0);
  }
  nanos_ = magic == kMagicNanos;
  uint32_t network;
  std::memcpy(&network, header + 20, 4);
  link_type_ = swap_ ? swap32(network) : network;
  offset_ = sizeof(header);
}

Reader::~Reader() {
  if (file_) std::fclose(file_);
}

bool Reader::next(Packet& out) {
  uint8_t rec[16];
  const size_t got = std::fread(rec, 1, sizeof(rec), file_);
  if (got == 0) return false;  // clean EOF
  if (got != sizeof(rec)) {
    throw PcapError("truncated pcap record header", offset_);
  }
  uint32_t f[4];
  std::memcpy(f, rec, sizeof(rec));
  if (swap_) {
    for (auto& v : f) v = swap32(v);
  }
  const uint32_t incl_len = f[2];
  if (incl_len > (1u << 26)) {
    throw PcapError("implausible pcap record length", offset_);
  }
  out.ts_ns = static_cast<uint64_t>(f[0]) * 1000000000ull +
              static_cast<uint64_t>(f[1]) * (nanos_ ? 1 : 1000);
  out.data.resize(incl_len);
  if (std::fread(out.data.data(), 1, incl_len, file_) != incl_len) {
    throw PcapError("truncated pcap record body", offset_ + sizeof(rec));
  }
  offset_ += sizeof(rec) + incl_len;
  return true;
}

Writer::Writer(const std::string& path, uint32_t link_type) {
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw PcapError("cannot create pcap file " + path, 0);
  uint8_t header[24] = {};
  const uint32_t magic = kMagicNanos;
  std::memcpy(header, &magic, 4);
  const uint16_t major = 2, minor = 4;
  std::memcpy(header + 4, &major, 2);
  std::memcpy(header + 6, &minor, 2);
  const uint32_t snaplen = 1u << 16;
  std::memcpy(header + 16, &snaplen, 4);
  std::memcpy(header + 20, &link_type, 4);
  std::fwrite(header, 1, sizeof(header), file_);
}

Writer::~Writer() {
  if (file_) std::fclose(file_);
}

void Writer::write(uint64_t ts_ns, std::span<const uint8_t> frame) {
  uint32_t rec[4];
  rec[0] = static_cast<uint32_t>(ts_ns / 1000000000ull);
  rec[1] = static_cast<uint32_t>(ts_ns % 1000000000ull);
  rec[2] = static_cast<uint32_t>(frame.size());
  rec[3] = static_cast<uint32_t>(frame.size());
  std::fwrite(rec, 1, sizeof(rec), file_);
  std::fwrite(frame.data(), 1, frame.size(), file_);
}

bool parse_frame(std::span<const uint8_t> frame, uint32_t link_type,
                 ParsedFrame& out) {
  size_t ip_off;
  if (link_type == kLinkEthernet) {
    if (frame.size() < 14) return false;
    if (rd16be(&frame[12]) != 0x0800) return false;  // not IPv4
    ip_off = 14;
  } else if (link_type == kLinkRawIp) {
    ip_off = 0;
  } else {
    return false;
  }
  if (frame.size() < ip_off + 20) return false;
  const uint8_t* ip = &frame[ip_off];
  if ((ip[0] >> 4) != 4) return false;
  const size_t ihl = static_cast<size_t>(ip[0] & 0xf) * 4;
  if (ihl < 20 || frame.size() < ip_off + ihl) return false;
  const uint16_t total_len = rd16be(ip + 2);
  if (total_len < ihl || frame.size() < ip_off + total_len) return false;
  if ((rd16be(ip + 6) & 0x3fff) != 0) return false;  // fragmented
  out.ttl = ip[8];
  const uint8_t proto = ip[9];
  out.src_addr = rd32be(ip + 12);
  out.dst_addr = rd32be(ip + 16);

  const uint8_t* tp = ip + ihl;
  const size_t tp_len = total_len - ihl;
  switch (proto) {
    case 17:  // UDP
      if (tp_len < 8) return false;
      out.proto = wire::DatagramSummary::Proto::Udp;
      out.udp_src_port = rd16be(tp);
      out.udp_dst_port = rd16be(tp + 2);
      out.payload = std::span<const uint8_t>(tp + 8, tp_len - 8);
      return true;
    case 1:  // ICMP
      if (tp_len < 4) return false;
      out.proto = wire::DatagramSummary::Proto::Icmp;
      out.icmp_type = tp[0];
      out.icmp_code = tp[1];
      out.payload = std::span<const uint8_t>(tp + 4, tp_len - 4);
      return true;
    case 6:
      out.proto = wire::DatagramSummary::Proto::Tcp;
      out.payload = {};
      return true;
    default:
      out.proto = wire::DatagramSummary::Proto::Other;
      out.payload = {};
      return true;
  }
}

uint16_t inet_checksum(std::span<const uint8_t> data) {
  uint32_t sum = 0;
  size_t i = 0;
  for (; i + 1 < data.size(); i += 2) {
    sum += static_cast<uint32_t>(data[i]) << 8 | data[i + 1];
  }
  if (i < data.size()) sum += static_cast<uint32_t>(data[i]) << 8;
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<uint16_t>(~sum);
}

namespace {

std::vector<uint8_t> build_ip_frame(Ipv4 src, Ipv4 dst, uint8_t ttl,
                                    uint8_t proto,
                                    std::span<const uint8_t> transport) {
  std::vector<uint8_t> frame(14 + 20 + transport.size());
  // Ethernet: synthetic MACs, IPv4 ethertype.
  frame[0] = 0x02;
  frame[6] = 0x02;
  frame[7] = 0x01;
  wr16be(&frame[12], 0x0800);
  uint8_t* ip = &frame[14];
  ip[0] = 0x45;
  wr16be(ip + 2, static_cast<uint16_t>(20 + transport.size()));
  ip[8] = ttl;
  ip[9] = proto;
  wr32be(ip + 12, src);
  wr32be(ip + 16, dst);
  const uint16_t cksum = inet_checksum(std::span<const uint8_t>(ip, 20));
  wr16be(ip + 10, cksum);
  std::copy(transport.begin(), transport.end(), ip + 20);
  return frame;
}

}  // namespace

std::vector<uint8_t> build_udp_frame(Ipv4 src, Ipv4 dst, uint8_t ttl,
                                     uint16_t sport, uint16_t dport,
                                     std::span<const uint8_t> payload) {
  std::vector<uint8_t> udp(8 + payload.size());
  wr16be(&udp[0], sport);
  wr16be(&udp[2], dport);
  wr16be(&udp[4], static_cast<uint16_t>(8 + payload.size()));
  // checksum left 0 (valid for UDP over IPv4)
  std::copy(payload.begin(), payload.end(), udp.begin() + 8);
  return build_ip_frame(src, dst, ttl, 17, udp);
}

std::vector<uint8_t> build_icmp_frame(Ipv4 src, Ipv4 dst, uint8_t ttl,
                                      std::span<const uint8_t> payload) {
  std::vector<uint8_t> icmp(4 + payload.size());
  icmp[0] = wire::kIcmpType;
  icmp[1] = wire::kIcmpCode;
  std::copy(payload.begin(), payload.end(), icmp.begin() + 4);
  const uint16_t cksum =
      inet_checksum(std::span<const uint8_t>(icmp.data(), icmp.size()));
  wr16be(&icmp[2], cksum);
  return build_ip_frame(src, dst, ttl, 1, icmp);
}

}  // namespace ihb::pcap
