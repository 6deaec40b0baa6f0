#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace ihb {

// IPv4 addresses are carried as host-order uint32_t throughout; they are
// converted to dotted-quad only at the text boundaries (records, CLI, logs).
using Ipv4 = uint32_t;

std::string format_ipv4(Ipv4 addr);
std::optional<Ipv4> parse_ipv4(const std::string& text);

// Number of leading bits shared by two addresses, in [0, 32].
unsigned common_prefix_len(Ipv4 a, Ipv4 b);

// A prefix with mask length, e.g. 10.0.0.0/8. The address is stored
// pre-masked so contains() is a single compare.
struct Prefix {
  Ipv4 addr = 0;
  uint8_t mask_len = 0;

  static Prefix of(Ipv4 addr, uint8_t mask_len);

  uint32_t mask() const {
    return mask_len == 0 ? 0 : ~uint32_t{0} << (32 - mask_len);
  }
  bool contains(Ipv4 a) const { return (a & mask()) == addr; }
  uint64_t size() const { return uint64_t{1} << (32 - mask_len); }

  bool operator==(const Prefix&) const = default;
};

// Parses "a.b.c.d/len". Returns nullopt on malformed input.
std::optional<Prefix> parse_prefix(const std::string& text);
std::string format_prefix(const Prefix& p);

// The /24 an address belongs to.
inline uint32_t slash24_index(Ipv4 addr) { return addr >> 8; }
inline Prefix slash24_of(Ipv4 addr) { return Prefix{addr & 0xffffff00u, 24}; }

}  // namespace ihb
