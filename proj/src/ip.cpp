#include "ihb/ip.hpp"

#include <cstdio>

namespace ihb {

std::string format_ipv4(Ipv4 addr) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", (addr >> 24) & 0xff,
                (addr >> 16) & 0xff, (addr >> 8) & 0xff, addr & 0xff);
  return buf;
}

std::optional<Ipv4> parse_ipv4(const std::string& text) {
  uint32_t octets[4];
  size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    if (pos >= text.size() || text[pos] < '0' || text[pos] > '9') {
      return std::nullopt;
    }
    uint32_t v = 0;
    size_t digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      v = v * 10 + static_cast<uint32_t>(text[pos] - '0');
      if (v > 255 || ++digits > 3) return std::nullopt;
      ++pos;
    }
    octets[i] = v;
    if (i < 3) {
      if (pos >= text.size() || text[pos] != '.') return std::nullopt;
      ++pos;
    }
  }
  if (pos != text.size()) return std::nullopt;
  return (octets[0] << 24) | (octets[1] << 16) | (octets[2] << 8) | octets[3];
}

unsigned common_prefix_len(Ipv4 a, Ipv4 b) {
  uint32_t diff = a ^ b;
  if (diff == 0) return 32;
  unsigned n = 0;
  while ((diff & 0x80000000u) == 0) {
    diff <<= 1;
    ++n;
  }
  return n;
}

Prefix Prefix::of(Ipv4 addr, uint8_t mask_len) {
  Prefix p{0, mask_len};
  p.addr = addr & p.mask();
  return p;
}

std::optional<Prefix> parse_prefix(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos) return std::nullopt;
  auto addr = parse_ipv4(text.substr(0, slash));
  if (!addr) return std::nullopt;
  const std::string len_str = text.substr(slash + 1);
  if (len_str.empty() || len_str.size() > 2) return std::nullopt;
  unsigned len = 0;
  for (char c : len_str) {
    if (c < '0' || c > '9') return std::nullopt;
    len = len * 10 + static_cast<unsigned>(c - '0');
  }
  if (len > 32) return std::nullopt;
  return Prefix::of(*addr, static_cast<uint8_t>(len));
}

std::string format_prefix(const Prefix& p) {
  return format_ipv4(p.addr) + "/" + std::to_string(p.mask_len);
}

}  // namespace ihb
