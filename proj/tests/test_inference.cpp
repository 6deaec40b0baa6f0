#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "helpers.hpp"
#include "ihb/inference.hpp"

using namespace ihb;
using namespace ihb::inference;

namespace {

constexpr uint64_t kSecond = 1000000000ull;

// State with one arrival per entry of (recv_s, hops), orig TTL 64.
observer::SourceState state_with_hops(
    const std::vector<std::pair<double, int>>& arrivals) {
  observer::SourceState st;
  st.key = {*parse_ipv4("1.2.3.4"), 7};
  st.declared_rate_uhz = 1000000;
  uint32_t seq = 0;
  for (const auto& [t_s, hops] : arrivals) {
    observer::Arrival a;
    a.recv_time_ns = static_cast<uint64_t>(t_s * 1e9);
    a.seq = seq++;
    a.orig_ttl = 64;
    a.arrival_ttl = static_cast<uint8_t>(64 - hops);
    a.timestamp_ns = a.recv_time_ns;
    if (!st.any_arrival) {
      st.first_seen_ns = a.recv_time_ns;
      st.hop_min = st.hop_max = hops;
      st.any_arrival = true;
    }
    st.hop_min = std::min(st.hop_min, hops);
    st.hop_max = std::max(st.hop_max, hops);
    st.last_seen_ns = a.recv_time_ns;
    st.history.push_back(a);
  }
  return st;
}

}  // namespace

TEST_CASE("silence consistency matches the published anchors") {
  // 1 pps against a /8 lens: ~67% after 100 s, ~3% after 15 minutes.
  CHECK(silence_consistency(1000000, 8, 100) == doctest::Approx(0.677).epsilon(0.0074));
  CHECK(std::abs(silence_consistency(1000000, 8, 100) - 0.677) < 0.005);
  CHECK(std::abs(silence_consistency(1000000, 8, 900) - 0.030) < 0.005);
  CHECK(silence_consistency(1000000, 8, 0) == 1.0);
  CHECK_THROWS_AS(silence_consistency(1000000, 25, 10), std::invalid_argument);
  CHECK_THROWS_AS(silence_consistency(1000000, 8, -1), std::invalid_argument);
}

TEST_CASE("silence consistency is monotone and bounded") {
  double prev = 1.0;
  for (double dt = 0; dt <= 3000; dt += 50) {
    const double p = silence_consistency(1000000, 8, dt);
    CHECK(p <= prev + 1e-12);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }
  // Non-increasing in rate too: more sends make silence less excusable.
  CHECK(silence_consistency(2000000, 8, 100) <
        silence_consistency(1000000, 8, 100));
  // And vanishing in the limit.
  CHECK(silence_consistency(1000000, 8, 1e6) < 1e-300);
}

TEST_CASE("poisson form tracks the bernoulli form closely") {
  for (double dt : {10.0, 100.0, 900.0}) {
    const double bern = silence_consistency(1000000, 8, dt);
    const double pois = silence_consistency_poisson(1000000, 8, dt);
    CHECK(pois == doctest::Approx(bern).epsilon(0.01));
  }
}

TEST_CASE("fractional rates floor the opportunity count") {
  // 1/8 pps for 100 s -> 12 opportunities, not 12.5.
  const double p = silence_consistency(125000, 8, 100);
  CHECK(p == doctest::Approx(std::pow(255.0 / 256.0, 12.0)));
}

TEST_CASE("expected arrival rate anchors are exact") {
  const double end_host = expected_arrival_rate(std::exp2(30), 0.125, 32);
  CHECK(end_host == 0.03125);  // exactly 1/32 pps
  const double telescope = expected_arrival_rate(std::exp2(30), 0.125, 8);
  CHECK(telescope == 524288.0);  // exactly 2^19 pps
  CHECK(expected_arrival_rate(0, 0.125, 8) == 0.0);
}

TEST_CASE("arrival rate is linear in n and r and halves per mask bit") {
  CHECK(expected_arrival_rate(2000, 0.5, 10) ==
        2 * expected_arrival_rate(1000, 0.5, 10));
  CHECK(expected_arrival_rate(1000, 1.0, 10) ==
        2 * expected_arrival_rate(1000, 0.5, 10));
  for (unsigned m = 0; m < 32; ++m) {
    CHECK(expected_arrival_rate(1e6, 0.25, m + 1) ==
          doctest::Approx(expected_arrival_rate(1e6, 0.25, m) / 2));
  }
}

TEST_CASE("interprobe hit spacing: half-range mean and geometric median") {
  CHECK(expected_interprobe_hits(8) == 128.0);
  CHECK(expected_interprobe_hits(9) == 256.0);
  CHECK(median_interprobe_hits(8) == doctest::Approx(256.0 * std::log(2.0)));

  // Monte-Carlo geometric draws: the median sits near 2^m ln 2 ~= 177,
  // the mean near 2^m = 256; the 128 figure is the half-range convention.
  Rng rng(71);
  const int trials = 1000000;
  std::vector<uint32_t> gaps(trials);
  uint64_t total = 0;
  for (auto& g : gaps) {
    uint32_t n = 1;
    while (rng.next_below(256) != 0) n++;
    g = n;
    total += n;
  }
  std::nth_element(gaps.begin(), gaps.begin() + trials / 2, gaps.end());
  const double median = gaps[trials / 2];
  const double mean = static_cast<double>(total) / trials;
  CHECK(median == doctest::Approx(177).epsilon(0.03));
  CHECK(mean == doctest::Approx(256).epsilon(0.01));
}

TEST_CASE("hop count subtraction tags implausible arrivals") {
  CHECK(hop_count(64, 57) == HopCount{7, false});
  CHECK(hop_count(64, 64) == HopCount{0, false});
  CHECK(hop_count(64, 70) == HopCount{-6, true});
  for (int h = 0; h <= 64; ++h) {
    CHECK(hop_count(64, static_cast<uint8_t>(64 - h)).hops == h);
  }
}

TEST_CASE("outage assessment multiplies member consistencies") {
  auto host = [&](const char* src, uint64_t last_seen_s) {
    observer::SourceState st;
    st.key = {*parse_ipv4(src), 1};
    st.declared_rate_uhz = 1000000;
    st.last_seen_ns = last_seen_s * kSecond;
    st.any_arrival = true;
    return st;
  };

  SUBCASE("single host, 900 s silent -> suspected outage") {
    const auto st = host("20.1.1.5", 100);
    const observer::SourceState* states[] = {&st};
    const auto a = outage_assessment(states, 1000 * kSecond, 8, 0.05);
    CHECK(a.p_consistent == doctest::Approx(0.0295).epsilon(0.01));
    CHECK(a.verdict == OutageVerdict::SuspectedOutage);
    CHECK(a.target == *parse_prefix("20.1.1.0/24"));
    CHECK(a.silence_s == doctest::Approx(900));
  }
  SUBCASE("two hosts, 100 s each -> product of singles, reachable") {
    const auto st1 = host("20.1.1.5", 900);
    const auto st2 = host("20.1.1.9", 900);
    const observer::SourceState* states[] = {&st1, &st2};
    const auto a = outage_assessment(states, 1000 * kSecond, 8, 0.05);
    const double single = silence_consistency(1000000, 8, 100);
    CHECK(a.p_consistent == doctest::Approx(single * single));
    CHECK(a.verdict == OutageVerdict::Reachable);
    CHECK(a.member_count == 2);
  }
  SUBCASE("freshly heard host is near 1") {
    const auto st = host("20.1.1.5", 999);
    const observer::SourceState* states[] = {&st};
    const auto a = outage_assessment(states, 1000 * kSecond, 8, 0.05);
    CHECK(a.p_consistent == doctest::Approx(0.996).epsilon(0.001));
    CHECK(a.verdict == OutageVerdict::Reachable);
  }
  SUBCASE("k identical hosts give the single-host value to the k-th power") {
    std::vector<observer::SourceState> sts;
    for (int i = 0; i < 5; ++i) {
      sts.push_back(host(("20.1.1." + std::to_string(i + 1)).c_str(), 800));
    }
    std::vector<const observer::SourceState*> ptrs;
    for (const auto& st : sts) ptrs.push_back(&st);
    const auto a = outage_assessment(ptrs, 1000 * kSecond, 8, 0.05);
    const double single = silence_consistency(1000000, 8, 200);
    CHECK(a.p_consistent == doctest::Approx(std::pow(single, 5)));
  }
  SUBCASE("empty set is an error") {
    std::vector<const observer::SourceState*> none;
    CHECK_THROWS_AS(outage_assessment(none, 0, 8, 0.05),
                    std::invalid_argument);
  }
  SUBCASE("mixed /24s are an error") {
    const auto st1 = host("20.1.1.5", 900);
    const auto st2 = host("20.1.2.5", 900);
    const observer::SourceState* states[] = {&st1, &st2};
    CHECK_THROWS_AS(outage_assessment(states, 1000 * kSecond, 8, 0.05),
                    std::invalid_argument);
  }
}

TEST_CASE("the 5% detection horizon sits at 766 silent opportunities") {
  // ln(0.05) / ln(255/256) = 765.4: the verdict flips between 765 and 766
  // send opportunities, which anchors the expected detection latencies.
  CHECK(silence_consistency(1000000, 8, 765) >= 0.05);
  CHECK(silence_consistency(1000000, 8, 766) < 0.05);
  const double crossing = std::log(0.05) / std::log(255.0 / 256.0);
  CHECK(crossing == doctest::Approx(765.4).epsilon(0.001));
}

TEST_CASE("joint outage threshold keeps the false-alarm budget per /24") {
  CHECK(joint_outage_threshold(0.05, 1) == 0.05);

  // k = 2 solves t(1 - ln t) = base.
  const double t2 = joint_outage_threshold(0.05, 2);
  CHECK(t2 * (1 - std::log(t2)) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(t2 == doctest::Approx(0.0087).epsilon(0.01));

  double prev = 0.05;
  for (unsigned k = 2; k <= 8; ++k) {
    const double t = joint_outage_threshold(0.05, k);
    CHECK(t < prev);
    prev = t;
  }

  // Monte-Carlo: the product of k healthy p-values trips at ~base rate.
  Rng rng(808);
  for (unsigned k : {2u, 3u, 5u}) {
    const double t = joint_outage_threshold(0.05, k);
    int trips = 0;
    const int trials = 200000;
    for (int i = 0; i < trials; ++i) {
      double prod = 1.0;
      for (unsigned j = 0; j < k; ++j) prod *= rng.next_double();
      if (prod < t) trips++;
    }
    CHECK(static_cast<double>(trips) / trials ==
          doctest::Approx(0.05).epsilon(0.1));
  }
}

TEST_CASE("path events: route change with persistence") {
  std::vector<std::pair<double, int>> arrivals;
  for (int i = 0; i < 200; ++i) {
    // 20 arrivals per 300 s window; hop 10 for 5 windows, then 12.
    const double t = i * 15.0;
    arrivals.emplace_back(t, t < 1500 ? 10 : 12);
  }
  Params params;
  const auto events = detect_path_events(state_with_hops(arrivals), params);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == PathEventKind::RouteChange);
  CHECK(events[0].before_mode == 10);
  CHECK(events[0].after_mode == 12);
  CHECK(events[0].delta_sign == 1);
  CHECK(events[0].onset_ns == 1500 * kSecond);
}

TEST_CASE("path events: 50/50 load balancing, no route change") {
  std::vector<std::pair<double, int>> arrivals;
  Rng rng(33);
  for (int i = 0; i < 400; ++i) {
    arrivals.emplace_back(i * 7.5, rng.next_bool(0.5) ? 10 : 12);
  }
  Params params;
  const auto events = detect_path_events(state_with_hops(arrivals), params);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == PathEventKind::LoadBalanced);
  REQUIRE(events[0].modes.size() == 2);
  CHECK(events[0].modes[0].first == 10);
  CHECK(events[0].modes[1].first == 12);
  CHECK(events[0].modes[0].second == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("path events: constant path yields nothing") {
  std::vector<std::pair<double, int>> arrivals;
  for (int i = 0; i < 300; ++i) arrivals.emplace_back(i * 10.0, 11);
  Params params;
  CHECK(detect_path_events(state_with_hops(arrivals), params).empty());
}

TEST_CASE("path events: sparse windows are ignored, not misread") {
  std::vector<std::pair<double, int>> arrivals;
  for (int i = 0; i < 9; ++i) arrivals.emplace_back(i * 30.0, 10);
  Params params;  // min_samples 10: the lone window is below threshold
  CHECK(detect_path_events(state_with_hops(arrivals), params).empty());
}

TEST_CASE("shared fate groups by onset proximity and delta sign") {
  auto change = [](const char* src, double onset_s, int before, int after) {
    PathChangeEvent e;
    e.kind = PathEventKind::RouteChange;
    e.key = {*parse_ipv4(src), 1};
    e.onset_ns = static_cast<uint64_t>(onset_s * 1e9);
    e.before_mode = before;
    e.after_mode = after;
    e.delta_sign = after > before ? 1 : -1;
    return e;
  };

  SUBCASE("three together, one an hour later") {
    std::vector<PathChangeEvent> events{
        change("1.1.1.1", 1000, 10, 12), change("2.2.2.2", 1020, 9, 11),
        change("3.3.3.3", 1050, 14, 16), change("4.4.4.4", 4600, 10, 12)};
    const auto groups = correlate_shared_fate(events, 60);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].members.size() == 3);
    CHECK(groups[0].delta_sign == 1);
  }
  SUBCASE("no events, no groups") {
    CHECK(correlate_shared_fate({}, 60).empty());
  }
  SUBCASE("opposite delta signs never group") {
    std::vector<PathChangeEvent> events{change("1.1.1.1", 1000, 10, 12),
                                        change("2.2.2.2", 1010, 12, 10)};
    CHECK(correlate_shared_fate(events, 60).empty());
  }
}

TEST_CASE("spoof detection: margin rule on the streaming form") {
  std::vector<std::pair<double, int>> arrivals;
  for (int i = 0; i < 20; ++i) arrivals.emplace_back(i * 10.0, 12);
  const auto st = state_with_hops(arrivals);
  Params params;

  wire::ObservedHeartbeat obs;
  obs.recv_time_ns = 300 * kSecond;
  obs.body.orig_ttl = 64;
  obs.body.seq = 999;

  obs.arrival_ttl = 59;  // 5 hops, far below min 12 - margin 3
  auto alert = detect_spoof(st, obs, params, {});
  REQUIRE(alert.has_value());
  CHECK(alert->evidence == SpoofEvidence::HopCountShrunk);
  CHECK(alert->observed_hops == 5);
  CHECK(alert->historical_min == 12);

  obs.arrival_ttl = 54;  // 10 hops: inside the margin
  CHECK(!detect_spoof(st, obs, params, {}).has_value());

  // A route change explaining the shorter path suppresses the alert.
  PathChangeEvent rc;
  rc.kind = PathEventKind::RouteChange;
  rc.key = st.key;
  rc.onset_ns = 200 * kSecond;
  rc.before_mode = 12;
  rc.after_mode = 5;
  rc.delta_sign = -1;
  obs.arrival_ttl = 59;
  const PathChangeEvent events[] = {rc};
  CHECK(!detect_spoof(st, obs, params, events).has_value());
}

TEST_CASE("spoof detection: too little history stays silent") {
  std::vector<std::pair<double, int>> arrivals;
  for (int i = 0; i < 5; ++i) arrivals.emplace_back(i * 10.0, 12);
  const auto st = state_with_hops(arrivals);
  wire::ObservedHeartbeat obs;
  obs.recv_time_ns = 100 * kSecond;
  obs.body.orig_ttl = 64;
  obs.arrival_ttl = 59;
  CHECK(!detect_spoof(st, obs, Params{}, {}).has_value());
}

TEST_CASE("batch spoof scan flags every forged arrival, not just the first") {
  std::vector<std::pair<double, int>> arrivals;
  for (int i = 0; i < 40; ++i) arrivals.emplace_back(i * 10.0, 12);
  // Interleaved forged stream at 5 hops.
  for (int i = 0; i < 10; ++i) arrivals.emplace_back(401 + i * 10.0, 5);
  for (int i = 0; i < 10; ++i) arrivals.emplace_back(405 + i * 10.0, 12);
  std::sort(arrivals.begin(), arrivals.end());
  const auto st = state_with_hops(arrivals);

  const auto alerts = detect_spoofs(st, Params{}, {});
  size_t hop_alerts = 0;
  for (const auto& a : alerts) {
    if (a.evidence == SpoofEvidence::HopCountShrunk) {
      hop_alerts++;
      CHECK(a.observed_hops == 5);
      CHECK(a.historical_min == 12);  // forged arrivals never drag it down
    }
  }
  CHECK(hop_alerts == 10);
}

TEST_CASE("meta conflicts turn into a spoof alert") {
  auto st = state_with_hops({{0, 12}, {10, 12}});
  st.rate_conflicts = 3;
  st.duplicate_seqs = 1;
  const auto alerts = detect_spoofs(st, Params{}, {});
  REQUIRE(alerts.size() == 1);
  CHECK(alerts[0].evidence == SpoofEvidence::MetaConflict);
}

TEST_CASE("alias candidates cluster by HostID and survive rotations") {
  observer::Snapshot snap;
  auto add_state = [&](const char* src, uint16_t id, double from_s,
                       double to_s) {
    observer::SourceState st;
    st.key = {*parse_ipv4(src), id};
    st.first_seen_ns = static_cast<uint64_t>(from_s * 1e9);
    st.last_seen_ns = static_cast<uint64_t>(to_s * 1e9);
    st.any_arrival = true;
    snap.states.push_back(st);
  };
  // A router with three interfaces under one HostID, rotating at t=1000.
  add_state("11.0.0.1", 0x100, 0, 990);
  add_state("11.0.0.2", 0x100, 0, 995);
  add_state("11.0.0.3", 0x100, 0, 993);
  add_state("11.0.0.1", 0x777, 1000, 2000);
  add_state("11.0.0.2", 0x777, 1000, 2000);
  add_state("11.0.0.3", 0x777, 1001, 2000);
  std::sort(snap.states.begin(), snap.states.end(),
            [](const auto& a, const auto& b) { return a.key < b.key; });

  const auto w1 = alias_candidates(snap, 0, 999 * kSecond);
  REQUIRE(w1.size() == 1);
  CHECK(w1[0].host_id == 0x100);
  CHECK(w1[0].members.size() == 3);
  CHECK(w1[0].tier == AliasTier::Candidate);

  const auto w2 =
      alias_candidates(snap, 1000 * kSecond, 2000 * kSecond, w1);
  REQUIRE(w2.size() == 1);
  CHECK(w2[0].host_id == 0x777);
  CHECK(w2[0].members == w1[0].members);
  CHECK(w2[0].tier == AliasTier::RotationConfirmed);
}

TEST_CASE("hostid collisions dissolve after one side rotates") {
  observer::Snapshot snap;
  auto add_state = [&](const char* src, uint16_t id, double from_s,
                       double to_s) {
    observer::SourceState st;
    st.key = {*parse_ipv4(src), id};
    st.first_seen_ns = static_cast<uint64_t>(from_s * 1e9);
    st.last_seen_ns = static_cast<uint64_t>(to_s * 1e9);
    snap.states.push_back(st);
  };
  // Two unrelated hosts share id 0x42 in the first window only.
  add_state("11.0.0.1", 0x42, 0, 2000);     // keeps its id
  add_state("12.0.0.1", 0x42, 0, 990);      // rotates away at t=1000
  add_state("12.0.0.1", 0x9999, 1000, 2000);
  std::sort(snap.states.begin(), snap.states.end(),
            [](const auto& a, const auto& b) { return a.key < b.key; });

  const auto w1 = alias_candidates(snap, 0, 999 * kSecond);
  REQUIRE(w1.size() == 1);
  CHECK(w1[0].tier == AliasTier::Candidate);

  const auto w2 = alias_candidates(snap, 1000 * kSecond, 2000 * kSecond, w1);
  CHECK(w2.empty());  // the collision pair dissolved
}

TEST_CASE("alias candidates: all-distinct HostIDs yield nothing") {
  observer::Snapshot snap;
  for (int i = 0; i < 6; ++i) {
    observer::SourceState st;
    st.key = {*parse_ipv4(("13.0.0." + std::to_string(i + 1)).c_str()),
              static_cast<uint16_t>(i)};
    st.last_seen_ns = kSecond;
    snap.states.push_back(st);
  }
  CHECK(alias_candidates(snap, 0, 10 * kSecond).empty());
}

TEST_CASE("nat estimate inverts the expected-distinct curve") {
  CHECK(nat_estimate_count(0, 65536) == 0.0);
  CHECK(nat_estimate_count(8, 16) == doctest::Approx(10.74).epsilon(0.001));
  CHECK(nat_estimate_count(5, 65536) == doctest::Approx(5.0).epsilon(0.0002));
  CHECK_THROWS_AS(nat_estimate_count(16, 16), std::invalid_argument);
  // Always at least the observed count.
  for (double d = 1; d < 16; ++d) {
    CHECK(nat_estimate_count(d, 16) >= d - 1e-9);
  }
}

TEST_CASE("nat estimate matches a monte-carlo distinct-id oracle (K=16)") {
  Rng rng(404);
  for (int n : {2, 4, 6, 8}) {
    const int trials = 100000;
    uint64_t distinct_total = 0;
    for (int t = 0; t < trials; ++t) {
      uint16_t mask = 0;
      for (int i = 0; i < n; ++i) {
        mask |= static_cast<uint16_t>(1u << rng.next_below(16));
      }
      distinct_total += static_cast<uint64_t>(std::popcount(mask));
    }
    const double d_hat = static_cast<double>(distinct_total) / trials;
    CHECK(nat_estimate_count(d_hat, 16) == doctest::Approx(n).epsilon(0.05));
  }
}

TEST_CASE("nat estimates from a snapshot report multi-id sources only") {
  observer::Snapshot snap;
  for (uint16_t id : {1, 2, 3, 4, 5}) {
    observer::SourceState st;
    st.key = {*parse_ipv4("77.1.2.3"), id};
    st.last_seen_ns = kSecond;
    snap.states.push_back(st);
  }
  observer::SourceState lone;
  lone.key = {*parse_ipv4("77.1.2.4"), 9};
  lone.last_seen_ns = kSecond;
  snap.states.push_back(lone);

  const auto estimates = nat_estimates(snap, 0, 10 * kSecond, 65536);
  REQUIRE(estimates.size() == 1);
  CHECK(estimates[0].src_addr == *parse_ipv4("77.1.2.3"));
  CHECK(estimates[0].distinct_hostids == 5);
  CHECK(estimates[0].estimate >= 5.0);
  CHECK(estimates[0].estimate == doctest::Approx(5.0).epsilon(0.001));
}

TEST_CASE("fault localization decision table") {
  CpeView view;

  SUBCASE("no outbound heartbeats at all -> local LAN") {
    view.outbound_lhb_seen = false;
    view.outbound_ihb_seen = false;
    CHECK(localize_fault(view).verdict == FaultSite::LocalLan);
  }
  SUBCASE("outbound fine, global inbound silent, provider LHBs silent") {
    view.outbound_lhb_seen = true;
    view.outbound_ihb_seen = true;
    view.inbound_global_p_consistent = 0.01;
    view.provider_lhb_seen = false;
    CHECK(localize_fault(view).verdict == FaultSite::Provider);
  }
  SUBCASE("outbound fine, global inbound silent, provider LHBs alive") {
    view.outbound_lhb_seen = true;
    view.outbound_ihb_seen = true;
    view.inbound_global_p_consistent = 0.01;
    view.provider_lhb_seen = true;
    CHECK(localize_fault(view).verdict == FaultSite::AccessLink);
  }
  SUBCASE("global healthy but one remote prefix silent -> remote") {
    view.outbound_lhb_seen = true;
    view.outbound_ihb_seen = true;
    view.inbound_global_p_consistent = 0.9;
    view.inbound_target_prefix_p_consistent = 0.01;
    CHECK(localize_fault(view).verdict == FaultSite::RemoteNetwork);
  }
  SUBCASE("everything within expectation -> healthy") {
    view.outbound_lhb_seen = true;
    view.outbound_ihb_seen = false;
    view.inbound_global_p_consistent = 0.8;
    view.inbound_target_prefix_p_consistent = 0.6;
    CHECK(localize_fault(view).verdict == FaultSite::Healthy);
  }
}
