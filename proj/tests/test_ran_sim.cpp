#include <doctest.h>

#include <algorithm>
#include <random>

#include "oran/ran_sim.hpp"
#include "test_util.hpp"

using namespace oran;

namespace {

SimConfig one_ue_per_slice() {
  SimConfig cfg;
  cfg.n_bs = 1;
  cfg.ues_per_bs = 3;
  return cfg;
}

ControlDirective directive(const std::string& bs, std::array<std::uint32_t, 3> prbs,
                           std::array<Policy, 3> pol) {
  ControlDirective d;
  d.bs_id = bs;
  for (std::size_t i = 0; i < 3; ++i) d.slices[i] = {prbs[i], pol[i]};
  return d;
}

}  // namespace

TEST_CASE("reference scenario defaults") {
  const SimConfig cfg;
  CHECK(cfg.n_bs == 7);
  CHECK(cfg.ues_per_bs == 6);
  CHECK(cfg.total_prbs == 50);
  CHECK(cfg.traffic.embb_mbps == 4.0);
  CHECK(cfg.traffic.mtc_kbps == 44.6);
  CHECK(cfg.traffic.urllc_kbps == 89.3);
  CHECK(cfg.traffic.uniform_mbps == 1.5);
  for (std::uint32_t u = 0; u < 6; ++u) CHECK(cfg.slice_of(u) == kAllSlices[u / 2]);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("zero offered load is a fixed point") {
  SimConfig cfg;
  cfg.traffic.embb_mbps = cfg.traffic.mtc_kbps = cfg.traffic.urllc_kbps = 0.0;
  BaseStation bs("bs1", cfg, 3);
  KpmCollector col(bs);
  bs.advance_ms(2000);
  for (const auto& ue : bs.ues()) CHECK(ue.queue_bytes == 0);
  for (const auto& r : col.collect(bs)) {
    CHECK(r.dl_throughput_mbps == 0.0);
    CHECK(r.tx_packets == 0);
    CHECK(r.buffer_bytes == 0);
    CHECK(r.offered_load_mbps == 0.0);
  }
}

TEST_CASE("pinned cqi 15 with the full band serves capacity_bytes(15, 50) per TTI") {
  auto cfg = one_ue_per_slice();
  cfg.traffic.embb_mbps = 200.0;
  cfg.traffic.mtc_kbps = cfg.traffic.urllc_kbps = 0.0;
  cfg.initial = {SliceControl{50, Policy::RR}, SliceControl{0, Policy::RR}, SliceControl{0, Policy::RR}};
  BaseStation bs("bs1", cfg, 1);
  bs.pin_cqi(0, 15);
  bs.advance_ms(20);  // build a backlog
  for (int t = 0; t < 200; ++t) {
    const auto before = bs.slice(SliceId::embb).counters.served_bytes;
    bs.step_tti();
    CHECK(bs.slice(SliceId::embb).counters.served_bytes - before == capacity_bytes(15, 50));
    CHECK(bs.last_grants()[0] == 50);
  }
}

TEST_CASE("overload grows the queue until the cap") {
  auto cfg = one_ue_per_slice();
  cfg.traffic.embb_mbps = 1000.0;
  cfg.queue_cap_bytes = 2'000'000;
  BaseStation bs("bs1", cfg, 9);
  std::uint64_t prev = 0;
  bool hit_cap = false;
  for (int t = 0; t < 400; ++t) {
    bs.step_tti();
    const auto q = bs.ues()[0].queue_bytes;
    CHECK(q <= cfg.queue_cap_bytes);
    if (!hit_cap) CHECK(q >= prev);
    hit_cap = hit_cap || q + 1500 > cfg.queue_cap_bytes;
    prev = q;
  }
  CHECK(hit_cap);
  CHECK(bs.ues()[0].dropped_bytes > 0);
  CHECK(bs.slice(SliceId::embb).counters.dropped_bytes == bs.ues()[0].dropped_bytes);
}

TEST_CASE("cqi stays within 1..15 and queues never underflow") {
  SimConfig cfg;
  cfg.cqi_step_prob = 1.0;
  BaseStation bs("bs1", cfg, 77);
  for (int t = 0; t < 20000; ++t) {
    bs.step_tti();
    for (const auto& ue : bs.ues()) {
      REQUIRE(ue.cqi >= kMinCqi);
      REQUIRE(ue.cqi <= kMaxCqi);
    }
  }
}

TEST_CASE("idle slice reports zeros") {
  SimConfig cfg;
  cfg.traffic.mtc_kbps = 0.0;
  BaseStation bs("bs1", cfg, 4);
  KpmCollector col(bs);
  bs.advance_ms(250);
  const auto recs = col.collect(bs);
  REQUIRE(recs.size() == 3);
  CHECK(recs[1].slice == SliceId::mtc);
  CHECK(recs[1].dl_throughput_mbps == 0.0);
  CHECK(recs[1].tx_packets == 0);
  CHECK(recs[1].buffer_bytes == 0);
  CHECK(recs[1].prb_alloc == 16);
}

TEST_CASE("eMBB with ample quota carries its offered 8 Mbps within 5 percent") {
  SimConfig cfg;
  cfg.initial = {SliceControl{46, Policy::PF}, SliceControl{2, Policy::RR}, SliceControl{2, Policy::RR}};
  BaseStation bs("bs1", cfg, 12);
  bs.pin_cqi(0, 15);
  bs.pin_cqi(1, 15);
  KpmCollector col(bs);
  bs.advance_ms(10'000);
  const auto recs = col.collect(bs);
  CHECK(recs[0].dl_throughput_mbps == doctest::Approx(8.0).epsilon(0.05));
  CHECK(recs[0].offered_load_mbps == doctest::Approx(8.0).epsilon(0.05));
  CHECK(recs[0].dl_throughput_mbps <= recs[0].offered_load_mbps);
}

TEST_CASE("conservation audits hold under random reconfiguration") {
  SimConfig cfg;
  BaseStation bs("bs1", cfg, 2024);
  KpmCollector col(bs);
  std::mt19937_64 rng(5);
  std::array<std::uint64_t, 3> prev_buf{};
  std::array<SliceCounters, 3> prev{};
  for (int w = 0; w < 200; ++w) {
    if (w % 4 == 0) {
      auto d = testutil::random_directive(rng, 50);
      d.bs_id = "bs1";
      CHECK(bs.apply_control(d) == ControlOutcome::accepted);
    }
    for (int t = 0; t < 250; ++t) {
      bs.step_tti();
      std::uint32_t quota_sum = 0;
      for (auto s : kAllSlices) {
        const auto& st = bs.slice(s);
        quota_sum += st.prb_quota;
        std::uint32_t granted = 0;
        for (auto m : st.members) granted += bs.last_grants()[m];
        REQUIRE(granted <= st.prb_quota);
      }
      REQUIRE(quota_sum == 50);
    }
    col.collect(bs);
    // Arrivals that entered the queue minus bytes served equal the change
    // in backlog, per slice and window.
    for (auto s : kAllSlices) {
      const auto& c = bs.slice(s).counters;
      const auto i = index_of(s);
      const std::uint64_t buf = bs.buffer_bytes(s);
      CHECK(prev_buf[i] + (c.enqueued_bytes - prev[i].enqueued_bytes) ==
            buf + (c.served_bytes - prev[i].served_bytes));
      CHECK(c.served_bytes <= c.generated_bytes);
      prev[i] = c;
      prev_buf[i] = buf;
    }
  }
  CHECK(bs.audit().prb_sum_violations == 0);
  CHECK(bs.audit().grant_violations == 0);
  CHECK(bs.audit().byte_violations == 0);
  CHECK(col.conservation_violations() == 0);
  CHECK(bs.rejected_controls() == 0);
}

TEST_CASE("apply_control stages the new split for the next TTI") {
  SimConfig cfg;
  BaseStation bs("bs1", cfg, 8);
  bs.advance_ms(10);
  const auto queued = bs.buffer_bytes(SliceId::embb);
  const auto d = directive("bs1", {36, 6, 8}, {Policy::PF, Policy::RR, Policy::WF});
  CHECK(bs.apply_control(d) == ControlOutcome::accepted);
  CHECK(bs.slice(SliceId::embb).prb_quota == 18);  // not yet
  CHECK(bs.buffer_bytes(SliceId::embb) == queued);
  bs.step_tti();
  CHECK(bs.slice(SliceId::embb).prb_quota == 36);
  CHECK(bs.slice(SliceId::embb).policy == Policy::PF);
  CHECK(bs.slice(SliceId::mtc).prb_quota == 6);
  CHECK(bs.slice(SliceId::mtc).policy == Policy::RR);
  CHECK(bs.slice(SliceId::urllc).prb_quota == 8);
  CHECK(bs.slice(SliceId::urllc).policy == Policy::WF);

  // Reapplying the same directive changes nothing.
  CHECK(bs.apply_control(d) == ControlOutcome::accepted);
  bs.step_tti();
  CHECK(bs.slice(SliceId::embb).prb_quota == 36);
  CHECK(bs.rejected_controls() == 0);
}

TEST_CASE("apply_control rejects bad sums and foreign targets") {
  SimConfig cfg;
  BaseStation bs("bs1", cfg, 8);
  CHECK(bs.apply_control(directive("bs1", {36, 6, 7}, {Policy::PF, Policy::RR, Policy::WF})) ==
        ControlOutcome::rejected);
  CHECK(bs.apply_control(directive("bs2", {36, 6, 8}, {Policy::PF, Policy::RR, Policy::WF})) ==
        ControlOutcome::rejected);
  bs.step_tti();
  CHECK(bs.slice(SliceId::embb).prb_quota == 18);
  CHECK(bs.slice(SliceId::mtc).prb_quota == 16);
  CHECK(bs.rejected_controls() == 2);
}

TEST_CASE("same seed gives bit-identical KPM streams") {
  SimConfig cfg;
  auto run = [&](std::uint64_t seed) {
    BaseStation bs("bs3", cfg, seed);
    KpmCollector col(bs);
    std::string log;
    for (int w = 0; w < 40; ++w) {
      bs.advance_ms(250);
      log += serialize_kpm_payload(col.collect(bs)) + "\n";
    }
    return log;
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("long-run throughput never exceeds offered load") {
  SimConfig cfg;
  cfg.traffic.kind = TrafficKind::uniform;
  BaseStation bs("bs1", cfg, 31);
  bs.advance_ms(30'000);
  for (auto s : kAllSlices) {
    const auto& c = bs.slice(s).counters;
    CHECK(c.served_bytes <= c.generated_bytes);
    CHECK(c.served_bytes + c.dropped_bytes + bs.buffer_bytes(s) == c.generated_bytes);
  }
}

TEST_CASE("E2 node agent serves subscriptions and controls") {
  SimConfig cfg;
  std::vector<E2Frame> out;
  E2NodeAgent node(BaseStation("bs1", cfg, 5), [&out](E2Frame f) { out.push_back(std::move(f)); });

  node.start();
  REQUIRE(out.size() == 1);
  CHECK(out[0].type == MessageType::XAppRegister);
  CHECK(out[0].dest_id == "ric");
  node.handle({MessageType::XAppRegister, "ric", "bs1", "accepted"});
  CHECK(node.registered());

  SUBCASE("no subscription, no indications") {
    node.advance_ms(10'000);
    CHECK(node.indications_sent() == 0);
    CHECK(out.size() == 1);
  }

  SUBCASE("250 ms subscription gives 40 indications in 10 s") {
    node.handle({MessageType::SubscriptionRequest, "xapp1", "bs1", "bs1;250"});
    node.advance_ms(10'000);
    CHECK(node.indications_sent() == 40);
    std::size_t n = 0;
    for (const auto& f : out) {
      if (f.type != MessageType::Indication) continue;
      ++n;
      CHECK(f.dest_id == "xapp1");
      auto recs = parse_kpm_payload(f.payload);
      REQUIRE(recs.size() == 3);
      CHECK(recs[0].timestamp_ms == static_cast<std::int64_t>(250 * n));
    }
    CHECK(n == 40);

    // Cancel.
    node.handle({MessageType::SubscriptionRequest, "xapp1", "bs1", "bs1;0"});
    node.advance_ms(1000);
    CHECK(node.indications_sent() == 40);
  }

  SUBCASE("control is applied, acknowledged and visible in the next indication") {
    node.handle({MessageType::SubscriptionRequest, "xapp1", "bs1", "bs1;250"});
    node.advance_ms(250);
    node.handle({MessageType::Control, "xapp1", "bs1", "bs1;embb:36:PF;mtc:6:RR;urllc:8:WF"});
    CHECK(out.back().type == MessageType::ControlAck);
    CHECK(out.back().dest_id == "xapp1");
    CHECK(out.back().payload == "bs1;accepted");
    node.advance_ms(250);
    auto recs = parse_kpm_payload(out.back().payload);
    CHECK(recs[0].prb_alloc == 36);
    CHECK(recs[1].prb_alloc == 6);
    CHECK(recs[2].prb_alloc == 8);

    node.handle({MessageType::Control, "xapp1", "bs1", "bs1;embb:36:PF;mtc:6:RR;urllc:7:WF"});
    CHECK(out.back().payload == "bs1;rejected");
    node.handle({MessageType::Control, "xapp1", "bs1", "garbage"});
    CHECK(out.back().payload == "bs1;rejected");
    CHECK(node.conservation_violations() == 0);
  }

  SUBCASE("simulation keeps stepping without a sink and resumes after restart") {
    node.set_sink(nullptr);
    node.advance_ms(500);
    CHECK(node.bs().now_ms() == 500);
    node.set_sink([&out](E2Frame f) { out.push_back(std::move(f)); });
    node.start();
    CHECK(out.back().type == MessageType::XAppRegister);
    CHECK_FALSE(node.registered());
  }
}

TEST_CASE("scenario config parsing") {
  const auto cfg = parse_sim_config(R"(# demo
seed = 9
n_bs = 2
traffic = uniform
initial_prbs = 30, 10, 10
initial_policies = PF, RR, WF
ric_port = 4000
)");
  CHECK(cfg.rng_seed == 9);
  CHECK(cfg.n_bs == 2);
  CHECK(cfg.traffic.kind == TrafficKind::uniform);
  CHECK(cfg.initial[0].prb_count == 30);
  CHECK(cfg.initial[2].policy == Policy::WF);
  CHECK(cfg.ric_port == 4000);

  CHECK_THROWS(parse_sim_config("bogus = 1"));
  CHECK_THROWS(parse_sim_config("n_bs = two"));
  CHECK_THROWS(parse_sim_config("initial_prbs = 10,10,10"));
  CHECK_THROWS(parse_sim_config("n_bs"));
}

TEST_CASE("round3 keeps three decimals") {
  CHECK(round3(3.9504) == 3.95);
  CHECK(round3(0.0126) == 0.013);
  CHECK(round3(12.0) == 12.0);
}
