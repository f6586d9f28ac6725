#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

#include "oran/link_model.hpp"
#include "oran/schedulers.hpp"
#include "sched_oracle.hpp"

using namespace oran;
using namespace testutil;

namespace {

std::uint32_t total(const Grants& g) { return std::accumulate(g.begin(), g.end(), 0u); }

void check_common_properties(const ScheduleInput& in, const Grants& g) {
  REQUIRE(g.size() == in.ues.size());
  std::uint64_t demand = 0;
  bool backlogged = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto d = prb_demand(in.ues[i]);
    demand += d;
    backlogged = backlogged || in.ues[i].queue_bytes > 0;
    if (in.ues[i].queue_bytes == 0) REQUIRE(g[i] == 0);
    REQUIRE(g[i] <= d);
  }
  REQUIRE(total(g) <= in.prb_quota);
  if (demand >= in.prb_quota) REQUIRE(total(g) == in.prb_quota);
  if (backlogged && in.prb_quota > 0) REQUIRE(total(g) >= 1);
}

}  // namespace

TEST_CASE("link model calibration") {
  CHECK(capacity_bytes(15, 50) * 1000 * 8 >= 70'000'000);
  CHECK(capacity_bytes(15, 50) * 1000 * 8 <= 80'000'000);
  for (int c = 1; c < 15; ++c) {
    for (std::uint32_t n = 0; n <= 50; ++n) CHECK(capacity_bytes(c, n) <= capacity_bytes(c + 1, n));
  }
  CHECK_THROWS_AS(bits_per_prb(0), LinkModelError);
  CHECK_THROWS_AS(bits_per_prb(16), LinkModelError);
}

TEST_CASE("prb demand rounds up") {
  CHECK(prb_demand(ue(0, 7)) == 0);
  CHECK(prb_demand(ue(1, 7)) == 1);
  CHECK(prb_demand(ue(45, 7)) == 1);  // 360 bits = 45 bytes per PRB
  CHECK(prb_demand(ue(46, 7)) == 2);
  CHECK(prb_demand(ue(1500, 1)) == 300);
}

TEST_CASE("round robin examples") {
  const ScheduleInput three{6, {ue(1'000'000, 7), ue(1'000'000, 7), ue(1'000'000, 7)}};
  std::size_t cursor = 0;
  CHECK(schedule_rr(three, cursor) == Grants{2, 2, 2});

  ScheduleInput seven = three;
  seven.prb_quota = 7;
  cursor = 0;
  CHECK(schedule_rr(seven, cursor) == Grants{3, 2, 2});
  CHECK(cursor == 1);
  // The next TTI starts at UE1.
  ScheduleInput one = three;
  one.prb_quota = 1;
  CHECK(schedule_rr(one, cursor) == Grants{0, 1, 0});
  CHECK(cursor == 2);

  const ScheduleInput idle{10, {ue(0, 7), ue(0, 15)}};
  cursor = 0;
  CHECK(schedule_rr(idle, cursor) == Grants{0, 0});
}

TEST_CASE("round robin fairness over cursor cycles") {
  std::mt19937_64 rng(4);
  for (std::size_t n = 1; n <= 6; ++n) {
    ScheduleInput in{0, std::vector<UeSchedInfo>(n, ue(1'000'000'000, 3))};
    std::vector<std::uint64_t> cum(n, 0);
    std::size_t cursor = 0;
    for (int tti = 0; tti < 200; ++tti) {
      in.prb_quota = static_cast<std::uint32_t>(rng() % 13);
      auto g = schedule_rr(in, cursor);
      for (std::size_t i = 0; i < n; ++i) cum[i] += g[i];
      const auto [lo, hi] = std::minmax_element(cum.begin(), cum.end());
      REQUIRE(*hi - *lo <= 1);
    }
  }
}

TEST_CASE("waterfilling examples") {
  CHECK(schedule_wf({10, {ue(1'000'000, 9), ue(1'000'000, 9)}}) == Grants{5, 5});

  auto g = schedule_wf({12, {ue(1'000'000, 15), ue(1'000'000, 5)}});
  CHECK(g[1] > g[0]);
  CHECK(total(g) == 12);
  CHECK(g == wf_oracle({12, {ue(1'000'000, 15), ue(1'000'000, 5)}}));

  // A single UE gets min(quota, demand).
  CHECK(schedule_wf({10, {ue(100, 7)}}) == Grants{3});
  CHECK(schedule_wf({2, {ue(100, 7)}}) == Grants{2});
}

TEST_CASE("proportional fair examples") {
  // UE0's average is ten times UE1's: UE1 takes the whole TTI.
  CHECK(schedule_pf({10, {ue(1'000'000, 7, 10.0), ue(1'000'000, 7, 1.0)}}) == Grants{0, 10});
  CHECK(schedule_pf({10, {}}).empty());
  CHECK(schedule_pf({0, {ue(1'000'000, 7)}}) == Grants{0});
  // Zero averages are floored rather than dividing by zero.
  auto g = schedule_pf({4, {ue(1'000'000, 7, 0.0), ue(1'000'000, 7, 0.0)}});
  CHECK(total(g) == 4);
}

TEST_CASE("exhaustive small instances against the reference loops") {
  std::size_t cases = 0;
  for_small_instances([&](const ScheduleInput& in) {
    ++cases;
    std::size_t cursor = in.prb_quota % std::max<std::size_t>(1, in.ues.size());
    const auto rr = schedule_rr(in, cursor);
    const auto wf = schedule_wf(in);
    const auto pf = schedule_pf(in);
    check_common_properties(in, rr);
    check_common_properties(in, wf);
    check_common_properties(in, pf);
    REQUIRE(wf == wf_oracle(in));
    REQUIRE(pf == pf_oracle(in, kPfAlpha));
  });
  CHECK(cases > 100000);
}

TEST_CASE("PF with equal cqi and averages hands out RR's multiset") {
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::uint32_t quota = 0; quota <= 6; ++quota) {
      for (int cqi = 1; cqi <= 15; ++cqi) {
        for (double avg : {1e-6, 0.5, 3.0}) {
          ScheduleInput in{quota, std::vector<UeSchedInfo>(n, ue(1'000'000, cqi, avg))};
          auto pf = schedule_pf(in);
          for (std::size_t start = 0; start < n; ++start) {
            std::size_t cursor = start;
            auto rr = schedule_rr(in, cursor);
            auto a = pf, b = rr;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            REQUIRE(a == b);
          }
        }
      }
    }
  }
}

TEST_CASE("schedulers are deterministic") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    ScheduleInput in{static_cast<std::uint32_t>(rng() % 50), {}};
    for (int u = 0; u < 4; ++u) {
      in.ues.push_back(ue(rng() % 20000, 1 + static_cast<int>(rng() % 15), 0.1 + (rng() % 100) / 10.0));
    }
    for (auto p : kAllPolicies) {
      SchedulerState s1{3}, s2{3};
      CHECK(schedule(p, in, s1) == schedule(p, in, s2));
      CHECK(s1.rr_cursor == s2.rr_cursor);
    }
  }
}

TEST_CASE("PF average bookkeeping") {
  CHECK(update_pf_average(0.0, 0.0) == kPfEpsilon);
  CHECK(update_pf_average(5.0, 2.0, 1.0) == doctest::Approx(2.0));

  const double r = 8.0;
  double avg = 0.0;
  const double gap0 = r;
  for (int n = 1; n <= 14; ++n) {
    avg = update_pf_average(avg, r);
    const double gap = std::abs(avg - r);
    CHECK(gap == doctest::Approx(gap0 * std::pow(1.0 - kPfAlpha, n)).epsilon(1e-9));
    if (n == 13) CHECK(gap > gap0 / 2);
    if (n == 14) CHECK(gap < gap0 / 2);
  }
}
