#include "ihb/emitters.hpp"

#include <arpa/inet.h>
#include <errno.h>
#include <netinet/in.h>
#include <poll.h>
#include <string.h>
#include <sys/socket.h>
#include <unistd.h>

#include "ihb/pcap.hpp"

namespace ihb::emitters {

namespace {

sockaddr_in make_addr(Ipv4 addr, uint16_t port) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  sa.sin_addr.s_addr = htonl(addr);
  return sa;
}

}  // namespace

NetworkEmitter::~NetworkEmitter() {
  for (auto& [src, fd] : udp_socks_) close(fd);
  for (auto& [src, fd] : icmp_socks_) close(fd);
}

int NetworkEmitter::udp_socket(Ipv4 src) {
  auto it = udp_socks_.find(src);
  if (it != udp_socks_.end()) return it->second;
  int fd = socket(AF_INET, SOCK_DGRAM, 0);
  if (fd >= 0 && src != 0) {
    sockaddr_in sa = make_addr(src, 0);
    if (bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      close(fd);
      fd = -1;
    }
  }
  udp_socks_[src] = fd;
  return fd;
}

int NetworkEmitter::icmp_socket(Ipv4 src) {
  auto it = icmp_socks_.find(src);
  if (it != icmp_socks_.end()) return it->second;
  int fd = socket(AF_INET, SOCK_RAW, IPPROTO_ICMP);
  if (fd >= 0 && src != 0) {
    sockaddr_in sa = make_addr(src, 0);
    if (bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      close(fd);
      fd = -1;
    }
  }
  icmp_socks_[src] = fd;
  return fd;
}

bool NetworkEmitter::emit(const sender::Emission& e) {
  const std::vector<uint8_t> payload = wire::encode(e.heartbeat);
  const bool udp =
      e.transport.proto == wire::TransportKind::Proto::UdpPort;
  const int fd = udp ? udp_socket(e.src_addr) : icmp_socket(e.src_addr);
  if (fd < 0) {
    failures_++;
    last_error_ = std::string("socket/bind: ") + strerror(errno);
    return false;
  }
  const int ttl = e.ttl;
  setsockopt(fd, IPPROTO_IP, IP_TTL, &ttl, sizeof(ttl));

  ssize_t sent;
  if (udp) {
    sockaddr_in dst = make_addr(e.dst_addr, e.transport.udp_port);
    sent = sendto(fd, payload.data(), payload.size(), 0,
                  reinterpret_cast<sockaddr*>(&dst), sizeof(dst));
  } else {
    std::vector<uint8_t> icmp(4 + payload.size());
    icmp[0] = wire::kIcmpType;
    icmp[1] = wire::kIcmpCode;
    memcpy(icmp.data() + 4, payload.data(), payload.size());
    const uint16_t cksum =
        pcap::inet_checksum(std::span<const uint8_t>(icmp.data(), icmp.size()));
    icmp[2] = static_cast<uint8_t>(cksum >> 8);
    icmp[3] = static_cast<uint8_t>(cksum);
    sockaddr_in dst = make_addr(e.dst_addr, 0);
    sent = sendto(fd, icmp.data(), icmp.size(), 0,
                  reinterpret_cast<sockaddr*>(&dst), sizeof(dst));
  }
  if (sent < 0) {
    failures_++;
    last_error_ = std::string("sendto: ") + strerror(errno);
    return false;
  }
  return true;
}

UdpListener::UdpListener(uint16_t port, const std::string& bind_addr)
    : port_(port) {
  fd_ = socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw std::runtime_error("udp socket: " + std::string(strerror(errno)));
  const int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  setsockopt(fd_, IPPROTO_IP, IP_RECVTTL, &one, sizeof(one));
  setsockopt(fd_, IPPROTO_IP, IP_PKTINFO, &one, sizeof(one));
  const auto addr = parse_ipv4(bind_addr);
  if (!addr) throw std::runtime_error("bad bind address: " + bind_addr);
  sockaddr_in sa = make_addr(*addr, port);
  if (bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    const std::string err = strerror(errno);
    close(fd_);
    fd_ = -1;
    throw std::runtime_error("udp bind: " + err);
  }
  if (port == 0) {
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }
}

UdpListener::~UdpListener() {
  if (fd_ >= 0) close(fd_);
}

std::optional<wire::ObservedHeartbeat> UdpListener::poll(int timeout_ms) {
  sender::SystemClock clock;
  for (;;) {
    struct pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc <= 0) return std::nullopt;

    uint8_t buf[512];
    uint8_t cmsg_buf[256];
    sockaddr_in peer{};
    struct iovec iov{buf, sizeof(buf)};
    struct msghdr msg{};
    msg.msg_name = &peer;
    msg.msg_namelen = sizeof(peer);
    msg.msg_iov = &iov;
    msg.msg_iovlen = 1;
    msg.msg_control = cmsg_buf;
    msg.msg_controllen = sizeof(cmsg_buf);
    const ssize_t n = recvmsg(fd_, &msg, 0);
    if (n < 0) return std::nullopt;

    int ttl = 0;
    Ipv4 dst = 0;
    for (cmsghdr* c = CMSG_FIRSTHDR(&msg); c; c = CMSG_NXTHDR(&msg, c)) {
      if (c->cmsg_level == IPPROTO_IP && c->cmsg_type == IP_TTL) {
        memcpy(&ttl, CMSG_DATA(c), sizeof(int));
      } else if (c->cmsg_level == IPPROTO_IP && c->cmsg_type == IP_PKTINFO) {
        in_pktinfo info;
        memcpy(&info, CMSG_DATA(c), sizeof(info));
        dst = ntohl(info.ipi_addr.s_addr);
      }
    }

    const std::span<const uint8_t> payload(buf, static_cast<size_t>(n));
    wire::DatagramSummary summary;
    summary.proto = wire::DatagramSummary::Proto::Udp;
    summary.udp_dst_port = port_;
    summary.payload_prefix = payload.subspan(0, std::min<size_t>(n, 8));
    if (wire::classify(summary, port_) != wire::Classification::Heartbeat) {
      non_heartbeat_++;
      continue;
    }
    const auto decoded = wire::decode(payload);
    if (!decoded.ok()) {
      malformed_++;
      continue;
    }
    wire::ObservedHeartbeat obs;
    obs.recv_time_ns = clock.now_ns();
    obs.src_addr = ntohl(peer.sin_addr.s_addr);
    obs.dst_addr = dst;
    obs.arrival_ttl = static_cast<uint8_t>(ttl);
    obs.transport = wire::TransportKind::udp(port_);
    obs.body = decoded.hb;
    return obs;
  }
}

}  // namespace ihb::emitters
