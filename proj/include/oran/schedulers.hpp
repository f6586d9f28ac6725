#pragma once

// Per-slice downlink schedulers: round-robin, byte-level waterfilling and
// proportional fair. All three hand out the slice quota one PRB at a time,
// never exceed a UE's demand and break ties on the lowest UE index.

#include <cstdint>
#include <span>
#include <vector>

#include "oran/e2_wire.hpp"

namespace oran {

struct UeSchedInfo {
  std::uint64_t queue_bytes{0};
  int cqi{1};
  double pf_avg_mbps{0.0};
};

struct ScheduleInput {
  std::uint32_t prb_quota{0};
  std::vector<UeSchedInfo> ues;  // ordered by ue_id
};

using Grants = std::vector<std::uint32_t>;

inline constexpr double kPfEpsilon = 1e-6;
inline constexpr double kPfAlpha = 0.05;

/// PRBs needed to drain the queue: ceil(queue / capacity_bytes(cqi, 1)).
std::uint32_t prb_demand(const UeSchedInfo& ue);

/// Round-robin. `cursor` is the index of the UE to consider first; on return
/// it points just past the last UE served.
Grants schedule_rr(const ScheduleInput& in, std::size_t& cursor);

/// Waterfilling on bytes served this TTI.
Grants schedule_wf(const ScheduleInput& in);

/// Proportional fair: rate(cqi) / projected average, where the projected
/// average folds in the PRBs already granted this TTI.
Grants schedule_pf(const ScheduleInput& in, double alpha = kPfAlpha);

/// EWMA update of the PF average, floored at kPfEpsilon.
double update_pf_average(double pf_avg_mbps, double served_mbps, double alpha = kPfAlpha);

/// Scheduler state owned by one slice.
struct SchedulerState {
  std::size_t rr_cursor{0};
};

Grants schedule(Policy policy, const ScheduleInput& in, SchedulerState& state);

}  // namespace oran
