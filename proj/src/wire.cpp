#include "ihb/wire.hpp"

#include <cstring>

namespace ihb::wire {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v >> 32));
  put_u32(out, static_cast<uint32_t>(v));
}

uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] << 8 | p[1]);
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) << 24 | static_cast<uint32_t>(p[1]) << 16 |
         static_cast<uint32_t>(p[2]) << 8 | static_cast<uint32_t>(p[3]);
}

uint64_t get_u64(const uint8_t* p) {
  return static_cast<uint64_t>(get_u32(p)) << 32 | get_u32(p + 4);
}

}  // namespace

const char* validate(const Heartbeat& hb) {
  if (hb.version != kVersion) return "version";
  if (hb.kind != HeartbeatKind::Ihb && hb.kind != HeartbeatKind::Lhb) {
    return "kind";
  }
  if (hb.rate_uhz == 0) return "rate_uhz";
  if (hb.orig_ttl < 1) return "orig_ttl";
  if (hb.pool.pool != PoolKind::FullV4 && hb.pool.pool != PoolKind::Per24 &&
      hb.pool.pool != PoolKind::Local) {
    return "pool.kind";
  }
  if (hb.pool.order != OrderKind::Random &&
      hb.pool.order != OrderKind::Permutation) {
    return "pool.order";
  }
  if (hb.pool.epoch > 0xffffffu) return "pool.epoch";
  if (hb.kind == HeartbeatKind::Lhb && hb.pool.pool != PoolKind::Local) {
    return "kind/pool";
  }
  return nullptr;
}

std::vector<uint8_t> encode(const Heartbeat& hb) {
  if (const char* field = validate(hb)) throw ValidationError(field);

  std::vector<uint8_t> out;
  out.reserve(encoded_size(hb.integrity.has_value()));
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(hb.version);
  out.push_back(static_cast<uint8_t>(hb.kind));
  put_u16(out, hb.host_id);
  out.push_back(hb.orig_ttl);
  put_u32(out, hb.rate_uhz);
  put_u32(out, hb.seq);
  put_u64(out, hb.timestamp_ns);
  put_u32(out, static_cast<uint32_t>(hb.pool.pool) << 28 |
                   static_cast<uint32_t>(hb.pool.order) << 24 | hb.pool.epoch);
  out.push_back(hb.integrity ? 1 : 0);
  if (hb.integrity) {
    const IntegrityBlock& ib = *hb.integrity;
    put_u16(out, ib.chain_epoch);
    put_u32(out, ib.key_index);
    out.insert(out.end(), ib.mac.begin(), ib.mac.end());
    out.insert(out.end(), ib.disclosed_key.begin(), ib.disclosed_key.end());
  }
  return out;
}

DecodeResult decode(std::span<const uint8_t> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    return {DecodeStatus::NotHeartbeat, {}};
  }
  if (bytes.size() < 4) return {DecodeStatus::Malformed, {}};
  if (bytes[3] != kVersion) return {DecodeStatus::UnsupportedVersion, {}};
  if (bytes.size() < kBareSize) return {DecodeStatus::Malformed, {}};

  const uint8_t flag = bytes[28];
  if (flag > 1) return {DecodeStatus::Malformed, {}};
  // Strict length: exactly the declared layout, no trailing bytes.
  if (bytes.size() != encoded_size(flag == 1)) {
    return {DecodeStatus::Malformed, {}};
  }

  Heartbeat hb;
  hb.version = bytes[3];
  hb.kind = static_cast<HeartbeatKind>(bytes[4]);
  hb.host_id = get_u16(&bytes[5]);
  hb.orig_ttl = bytes[7];
  hb.rate_uhz = get_u32(&bytes[8]);
  hb.seq = get_u32(&bytes[12]);
  hb.timestamp_ns = get_u64(&bytes[16]);
  const uint32_t pd = get_u32(&bytes[24]);
  hb.pool.pool = static_cast<PoolKind>(pd >> 28);
  hb.pool.order = static_cast<OrderKind>((pd >> 24) & 0xf);
  hb.pool.epoch = pd & 0xffffffu;
  if (flag == 1) {
    IntegrityBlock ib;
    ib.chain_epoch = get_u16(&bytes[29]);
    ib.key_index = get_u32(&bytes[31]);
    std::memcpy(ib.mac.data(), &bytes[35], 16);
    std::memcpy(ib.disclosed_key.data(), &bytes[51], 16);
    hb.integrity = ib;
  }
  if (validate(hb) != nullptr) return {DecodeStatus::Malformed, {}};
  return {DecodeStatus::Ok, hb};
}

Classification classify(const DatagramSummary& raw, uint16_t udp_port) {
  const bool transport_ok =
      (raw.proto == DatagramSummary::Proto::Udp &&
       raw.udp_dst_port == udp_port) ||
      (raw.proto == DatagramSummary::Proto::Icmp && raw.icmp_type == kIcmpType &&
       raw.icmp_code == kIcmpCode);
  if (!transport_ok) return Classification::NotHeartbeat;
  if (raw.payload_prefix.size() < kMagic.size()) {
    return Classification::NotHeartbeat;
  }
  if (std::memcmp(raw.payload_prefix.data(), kMagic.data(), kMagic.size()) !=
      0) {
    return Classification::NotHeartbeat;
  }
  return Classification::Heartbeat;
}

}  // namespace ihb::wire
