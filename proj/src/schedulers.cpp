#include "oran/schedulers.hpp"

#include <algorithm>

#include "oran/link_model.hpp"

namespace oran {

std::uint32_t prb_demand(const UeSchedInfo& ue) {
  if (ue.queue_bytes == 0) return 0;
  const std::uint64_t per_prb = capacity_bytes(ue.cqi, 1);
  const std::uint64_t prbs = (ue.queue_bytes + per_prb - 1) / per_prb;
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(prbs, UINT32_MAX));
}

namespace {

std::vector<std::uint32_t> demands(const ScheduleInput& in) {
  std::vector<std::uint32_t> d(in.ues.size());
  for (std::size_t i = 0; i < in.ues.size(); ++i) d[i] = prb_demand(in.ues[i]);
  return d;
}

double rate_mbps(int cqi, std::uint32_t prbs) {
  // bytes per 1 ms TTI -> Mbps
  return static_cast<double>(capacity_bytes(cqi, prbs)) * 8.0 / 1000.0;
}

}  // namespace

Grants schedule_rr(const ScheduleInput& in, std::size_t& cursor) {
  const std::size_t n = in.ues.size();
  Grants grants(n, 0);
  if (n == 0) return grants;
  auto left = demands(in);
  std::uint32_t quota = in.prb_quota;
  std::size_t idx = cursor % n;
  while (quota > 0) {
    std::size_t probe = 0;
    while (probe < n && left[(idx + probe) % n] == 0) ++probe;
    if (probe == n) break;
    const std::size_t ue = (idx + probe) % n;
    ++grants[ue];
    --left[ue];
    --quota;
    idx = (ue + 1) % n;
    cursor = idx;
  }
  return grants;
}

Grants schedule_wf(const ScheduleInput& in) {
  const std::size_t n = in.ues.size();
  Grants grants(n, 0);
  auto left = demands(in);
  std::vector<std::uint64_t> served(n, 0);
  for (std::uint32_t q = 0; q < in.prb_quota; ++q) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (left[i] == 0) continue;
      if (best == n || served[i] < served[best]) best = i;
    }
    if (best == n) break;
    ++grants[best];
    --left[best];
    served[best] =
        std::min(in.ues[best].queue_bytes, capacity_bytes(in.ues[best].cqi, grants[best]));
  }
  return grants;
}

Grants schedule_pf(const ScheduleInput& in, double alpha) {
  const std::size_t n = in.ues.size();
  Grants grants(n, 0);
  auto left = demands(in);
  std::vector<double> inst(n);
  for (std::size_t i = 0; i < n; ++i) inst[i] = rate_mbps(in.ues[i].cqi, 1);

  auto metric = [&](std::size_t i) {
    const double avg = std::max(in.ues[i].pf_avg_mbps, kPfEpsilon) +
                       alpha * rate_mbps(in.ues[i].cqi, grants[i]);
    return inst[i] / avg;
  };

  for (std::uint32_t q = 0; q < in.prb_quota; ++q) {
    std::size_t best = n;
    double best_metric = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (left[i] == 0) continue;
      const double m = metric(i);
      if (best == n || m > best_metric) {
        best = i;
        best_metric = m;
      }
    }
    if (best == n) break;
    ++grants[best];
    --left[best];
  }
  return grants;
}

double update_pf_average(double pf_avg_mbps, double served_mbps, double alpha) {
  return std::max((1.0 - alpha) * pf_avg_mbps + alpha * served_mbps, kPfEpsilon);
}

Grants schedule(Policy policy, const ScheduleInput& in, SchedulerState& state) {
  switch (policy) {
    case Policy::RR: return schedule_rr(in, state.rr_cursor);
    case Policy::WF: return schedule_wf(in);
    case Policy::PF: return schedule_pf(in);
  }
  return Grants(in.ues.size(), 0);
}

}  // namespace oran
