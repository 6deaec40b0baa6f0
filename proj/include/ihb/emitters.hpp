#pragma once

#include <map>
#include <optional>
#include <string>

#include "ihb/records.hpp"
#include "ihb/sender.hpp"

// Emission adapters behind the sender's Emitter capability, plus the
// matching live-capture entry point for the observer. The network paths
// need an interface address that is actually local (and CAP_NET_RAW for
// ICMP); failures are reported per-slot, never fatal.
namespace ihb::emitters {

// Writes one emission record per line for offline replay.
class FileEmitter : public sender::Emitter {
 public:
  explicit FileEmitter(const std::string& path) : writer_(path) {}
  bool emit(const sender::Emission& e) override {
    writer_.write(records::emission_to_json(e));
    return true;
  }
  void flush() { writer_.flush(); }

 private:
  records::JsonlWriter writer_;
};

// Sends heartbeats on the wire: UDP datagrams from a per-source bound
// socket, or raw ICMP (experimental type) when the emission says so.
class NetworkEmitter : public sender::Emitter {
 public:
  ~NetworkEmitter() override;
  bool emit(const sender::Emission& e) override;

  uint64_t failures() const { return failures_; }
  const std::string& last_error() const { return last_error_; }

 private:
  int udp_socket(Ipv4 src);
  int icmp_socket(Ipv4 src);

  std::map<Ipv4, int> udp_socks_;
  std::map<Ipv4, int> icmp_socks_;
  uint64_t failures_ = 0;
  std::string last_error_;
};

// Blocking UDP capture with per-datagram TTL (IP_RECVTTL) and destination
// address (IP_PKTINFO) recovery.
class UdpListener {
 public:
  explicit UdpListener(uint16_t port, const std::string& bind_addr = "0.0.0.0");
  ~UdpListener();

  // One datagram, classified and decoded; nullopt on timeout. Non-heartbeat
  // and malformed datagrams are counted and skipped within the timeout.
  std::optional<wire::ObservedHeartbeat> poll(int timeout_ms);

  uint16_t port() const { return port_; }
  uint64_t non_heartbeat() const { return non_heartbeat_; }
  uint64_t malformed() const { return malformed_; }

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
  uint64_t non_heartbeat_ = 0;
  uint64_t malformed_ = 0;
};

}  // namespace ihb::emitters
