#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ihb/integrity.hpp"
#include "ihb/ip.hpp"
#include "ihb/rng.hpp"
#include "ihb/schedule.hpp"
#include "ihb/wire.hpp"

namespace ihb::sender {

struct InterfaceConfig {
  std::string name;
  Ipv4 src_addr = 0;
  schedule::Schedule sched;
  wire::TransportKind transport = wire::TransportKind::udp();
  uint32_t rate_uhz = 0;  // declared and actual message rate
  uint8_t ihb_ttl = 64;   // originating TTL for non-local pools
  bool pair_mode = false;
};

// One protocol instance per interface; the HostID is shared across all of
// them. Each interface gets an independent integrity chain (seeded from
// the sender seed and the interface index) so the emission loops share
// nothing but the atomically updated HostID.
struct SenderConfig {
  std::vector<InterfaceConfig> interfaces;
  uint16_t host_id = 0;
  std::optional<uint64_t> hostid_rotation_period_ns;
  std::optional<integrity::ChainConfig> integrity;
  uint64_t seed = 0;
};

const char* validate(const SenderConfig& cfg);

struct Emission {
  uint64_t send_time_ns = 0;
  Ipv4 src_addr = 0;
  Ipv4 dst_addr = 0;
  uint8_t ttl = 0;
  wire::TransportKind transport;
  wire::Heartbeat heartbeat;
  uint32_t iface_index = 0;

  bool operator==(const Emission&) const = default;
};

// Injected time source. wait_until returns false when the stop signal was
// raised before (or instead of) reaching the target instant.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual uint64_t now_ns() = 0;
  virtual bool wait_until(uint64_t t_ns, const std::atomic<bool>& stop) = 0;
};

// Jumps straight to each requested instant; the emission loop becomes a
// pure function of its config under this clock.
class VirtualClock : public Clock {
 public:
  explicit VirtualClock(uint64_t start_ns = 0) : now_(start_ns) {}
  uint64_t now_ns() override { return now_; }
  bool wait_until(uint64_t t_ns, const std::atomic<bool>& stop) override {
    if (stop.load(std::memory_order_relaxed)) return false;
    if (t_ns > now_) now_ = t_ns;
    return true;
  }

 private:
  uint64_t now_;
};

// Wall-clock time (CLOCK_REALTIME for timestamps, nanosleep for pacing).
class SystemClock : public Clock {
 public:
  uint64_t now_ns() override;
  bool wait_until(uint64_t t_ns, const std::atomic<bool>& stop) override;
};

class Emitter {
 public:
  virtual ~Emitter() = default;
  // False signals a transient failure; the slot is skipped and the
  // schedule still advances.
  virtual bool emit(const Emission& e) = 0;
};

class CollectingEmitter : public Emitter {
 public:
  bool emit(const Emission& e) override {
    emissions.push_back(e);
    return true;
  }
  std::vector<Emission> emissions;
};

// Emission engine for a single interface. Slot times are derived from the
// slot index with 128-bit arithmetic, so there is no cumulative rounding
// drift at any rate.
class InterfaceCore {
 public:
  InterfaceCore(InterfaceConfig cfg, Rng rng,
                std::optional<integrity::ChainConfig> chain_cfg);

  InterfaceCore(InterfaceCore&& other) noexcept
      : cfg_(std::move(other.cfg_)),
        rate_uhz_(other.rate_uhz_.load()),
        next_ns_(other.next_ns_),
        seq_(other.seq_),
        rng_(other.rng_),
        chain_(std::move(other.chain_)) {}

  uint64_t next_slot_ns() const { return next_ns_; }

  // Shifts slot 0 to the loop's start instant; called once per run.
  void rebase(uint64_t start_ns) { next_ns_ += start_ns; }

  // Emits the slot's messages (two in pair mode, sharing one destination
  // and sequence number) and advances to the next slot.
  std::vector<Emission> emit_slot(uint16_t host_id, uint64_t now_ns,
                                  uint32_t iface_index);

  // Takes effect at the next slot, both for pacing and for the declared
  // rate field.
  void set_rate(uint32_t rate_uhz) {
    rate_uhz_.store(rate_uhz, std::memory_order_relaxed);
  }
  uint32_t rate() const { return rate_uhz_.load(std::memory_order_relaxed); }

  const schedule::Schedule& sched() const { return cfg_.sched; }

 private:
  uint64_t period_ns() const;

  InterfaceConfig cfg_;
  std::atomic<uint32_t> rate_uhz_;
  uint64_t next_ns_;
  uint32_t seq_ = 0;
  Rng rng_;
  std::optional<integrity::ChainState> chain_;
};

// Drives all interface instances of one sender in global time order.
// Deterministic under VirtualClock: ties between interfaces resolve by
// interface index, and a due HostID rotation is applied before any
// same-instant emission.
class Sender {
 public:
  explicit Sender(SenderConfig cfg);

  // Runs until the stop signal or until_ns (exclusive), whichever first.
  void run(Clock& clock, Emitter& emitter, const std::atomic<bool>& stop,
           uint64_t until_ns = UINT64_MAX);

  void set_rate(size_t iface_index, uint32_t rate_uhz);
  uint16_t current_host_id() const {
    return host_id_.load(std::memory_order_relaxed);
  }

  // Observed rotations (time, old id, new id); useful for ground truth.
  std::function<void(uint64_t, uint16_t, uint16_t)> on_rotation;

  uint64_t emit_failures() const { return emit_failures_; }

 private:
  SenderConfig cfg_;
  std::vector<InterfaceCore> cores_;
  std::atomic<uint16_t> host_id_;
  Rng rotation_rng_;
  uint64_t emit_failures_ = 0;
  bool started_ = false;
  uint64_t next_rotation_ns_ = UINT64_MAX;
};

// Draws a fresh uniform 16-bit HostID and applies it to every interface
// instance at once.
uint16_t rotate_hostid(std::atomic<uint16_t>& host_id, Rng& rng);

}  // namespace ihb::sender
