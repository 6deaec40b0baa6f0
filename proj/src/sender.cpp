#include "ihb/sender.hpp"

#include <time.h>

#include <stdexcept>

namespace ihb::sender {

const char* validate(const SenderConfig& cfg) {
  if (cfg.interfaces.empty()) return "at least one interface required";
  for (const auto& iface : cfg.interfaces) {
    if (iface.rate_uhz == 0) return "rate_uhz must be > 0";
    if (iface.ihb_ttl < 1) return "ihb_ttl must be >= 1";
    if (const char* err = schedule::validate(iface.sched.pool)) return err;
  }
  if (cfg.integrity && cfg.integrity->length < 2) {
    return "integrity chain length must be >= 2";
  }
  return nullptr;
}

uint64_t SystemClock::now_ns() {
  struct timespec ts{};
  clock_gettime(CLOCK_REALTIME, &ts);
  return static_cast<uint64_t>(ts.tv_sec) * 1000000000ull +
         static_cast<uint64_t>(ts.tv_nsec);
}

bool SystemClock::wait_until(uint64_t t_ns, const std::atomic<bool>& stop) {
  // Sleep in short slices so a stop signal is honored promptly.
  for (;;) {
    if (stop.load(std::memory_order_relaxed)) return false;
    const uint64_t now = now_ns();
    if (now >= t_ns) return true;
    const uint64_t remain = t_ns - now;
    const uint64_t slice = remain < 50000000ull ? remain : 50000000ull;
    struct timespec ts{};
    ts.tv_sec = static_cast<time_t>(slice / 1000000000ull);
    ts.tv_nsec = static_cast<long>(slice % 1000000000ull);
    nanosleep(&ts, nullptr);
  }
}

InterfaceCore::InterfaceCore(InterfaceConfig cfg, Rng rng,
                             std::optional<integrity::ChainConfig> chain_cfg)
    : cfg_(std::move(cfg)),
      rate_uhz_(cfg_.rate_uhz),
      next_ns_(0),
      rng_(rng) {
  if (chain_cfg) chain_.emplace(*chain_cfg);
}

uint64_t InterfaceCore::period_ns() const {
  // message period = 1e15 / rate_uhz ns; a pair slot covers two messages.
  const unsigned __int128 numer =
      static_cast<unsigned __int128>(1000000000000000ull) *
      (cfg_.pair_mode ? 2 : 1);
  return static_cast<uint64_t>(numer / rate_uhz_.load());
}

std::vector<Emission> InterfaceCore::emit_slot(uint16_t host_id,
                                               uint64_t now_ns,
                                               uint32_t iface_index) {
  // The epoch stamped on the wire is the one the destination was drawn
  // from; next_destination may advance it on wrap.
  const uint32_t epoch = cfg_.sched.order.epoch;
  const Ipv4 dst = schedule::next_destination(cfg_.sched, rng_);
  const bool local = cfg_.sched.pool.kind == wire::PoolKind::Local;

  uint8_t ttl;
  if (!local) {
    ttl = cfg_.ihb_ttl;
  } else if (dst == cfg_.src_addr) {
    ttl = 1;  // walking the own subnet includes the own address
  } else {
    ttl = schedule::lhb_ttl(cfg_.src_addr, dst);
  }

  wire::Heartbeat hb;
  hb.kind = local ? wire::HeartbeatKind::Lhb : wire::HeartbeatKind::Ihb;
  hb.host_id = host_id;
  hb.rate_uhz = rate_uhz_.load(std::memory_order_relaxed);
  hb.orig_ttl = ttl;
  hb.timestamp_ns = now_ns;
  hb.pool = {cfg_.sched.pool.kind, cfg_.sched.order.kind, epoch};
  hb.seq = seq_;

  std::vector<Emission> out;
  const int count = cfg_.pair_mode ? 2 : 1;
  for (int i = 0; i < count; ++i) {
    wire::Heartbeat msg = hb;
    if (chain_) msg = chain_->sign(msg, cfg_.src_addr);
    out.push_back(Emission{now_ns, cfg_.src_addr, dst, ttl, cfg_.transport,
                           msg, iface_index});
  }

  seq_++;
  next_ns_ += period_ns();
  return out;
}

Sender::Sender(SenderConfig cfg)
    : cfg_(std::move(cfg)),
      host_id_(cfg_.host_id),
      rotation_rng_(Rng(cfg_.seed).fork(0x726f74)) {
  if (const char* err = validate(cfg_)) throw std::invalid_argument(err);
  Rng root(cfg_.seed);
  for (size_t i = 0; i < cfg_.interfaces.size(); ++i) {
    std::optional<integrity::ChainConfig> chain = cfg_.integrity;
    if (chain) chain->seed = mix64(chain->seed ^ mix64(i + 1));
    cores_.emplace_back(cfg_.interfaces[i], root.fork(i + 1), chain);
  }
}

uint16_t rotate_hostid(std::atomic<uint16_t>& host_id, Rng& rng) {
  const auto id = static_cast<uint16_t>(rng.next_below(1u << 16));
  host_id.store(id, std::memory_order_relaxed);
  return id;
}

void Sender::set_rate(size_t iface_index, uint32_t rate_uhz) {
  if (rate_uhz == 0) throw std::invalid_argument("rate_uhz must be > 0");
  cores_.at(iface_index).set_rate(rate_uhz);
}

void Sender::run(Clock& clock, Emitter& emitter, const std::atomic<bool>& stop,
                 uint64_t until_ns) {
  if (!started_) {
    const uint64_t start = clock.now_ns();
    for (auto& core : cores_) core.rebase(start);
    if (cfg_.hostid_rotation_period_ns) {
      next_rotation_ns_ = start + *cfg_.hostid_rotation_period_ns;
    }
    started_ = true;
  }

  for (;;) {
    size_t due_core = 0;
    uint64_t due_ns = UINT64_MAX;
    for (size_t i = 0; i < cores_.size(); ++i) {
      if (cores_[i].next_slot_ns() < due_ns) {
        due_ns = cores_[i].next_slot_ns();
        due_core = i;
      }
    }
    const bool rotation_due = next_rotation_ns_ <= due_ns;
    const uint64_t event_ns = rotation_due ? next_rotation_ns_ : due_ns;
    if (event_ns >= until_ns) return;
    if (!clock.wait_until(event_ns, stop)) return;

    if (rotation_due) {
      const uint16_t old_id = host_id_.load(std::memory_order_relaxed);
      const uint16_t new_id = rotate_hostid(host_id_, rotation_rng_);
      if (on_rotation) on_rotation(event_ns, old_id, new_id);
      next_rotation_ns_ += *cfg_.hostid_rotation_period_ns;
      continue;
    }

    const auto emissions = cores_[due_core].emit_slot(
        host_id_.load(std::memory_order_relaxed), clock.now_ns(),
        static_cast<uint32_t>(due_core));
    for (const auto& e : emissions) {
      if (!emitter.emit(e)) emit_failures_++;
    }
  }
}

}  // namespace ihb::sender
