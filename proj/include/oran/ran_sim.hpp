#pragma once

// Deterministic discrete-time simulator of a sliced LTE-like base station.
// One BaseStation is a single-owner state machine advanced one 1 ms TTI at a
// time; all randomness comes from its own seeded engine.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oran/e2_wire.hpp"
#include "oran/link_model.hpp"
#include "oran/schedulers.hpp"

namespace oran {

enum class TrafficKind { slice_based, uniform };

std::string_view to_string(TrafficKind k);
std::optional<TrafficKind> parse_traffic_kind(std::string_view s);

struct TrafficProfile {
  TrafficKind kind{TrafficKind::slice_based};
  double embb_mbps{4.0};
  double mtc_kbps{44.6};
  double urllc_kbps{89.3};
  double uniform_mbps{1.5};

  /// Offered load of one UE of `slice`, in bits per second.
  double ue_rate_bps(SliceId slice) const;
};

/// Packet size used for a slice's traffic.
constexpr std::uint32_t packet_bytes(SliceId s) { return s == SliceId::embb ? 1500u : 125u; }

struct SimConfig {
  std::uint32_t n_bs{7};
  std::uint32_t ues_per_bs{6};
  std::uint32_t total_prbs{50};
  std::uint32_t tti_ms{1};
  std::uint32_t report_period_ms{250};
  std::uint32_t control_period_ms{1000};
  TrafficProfile traffic{};
  std::uint64_t rng_seed{1};
  std::array<SliceControl, kNumSlices> initial{
      SliceControl{18, Policy::RR}, SliceControl{16, Policy::RR}, SliceControl{16, Policy::RR}};
  std::uint64_t queue_cap_bytes{10'000'000};
  double cqi_step_prob{0.2};
  int cqi_init_min{kMinCqi};
  int cqi_init_max{kMaxCqi};
  std::string ric_host{"127.0.0.1"};
  std::uint16_t ric_port{36421};

  /// Slice of UE `ue` (contiguous equal blocks: 2 UEs per slice by default).
  SliceId slice_of(std::uint32_t ue) const;
  /// Throws std::invalid_argument when the config is unusable.
  void validate() const;
  std::string bs_name(std::uint32_t index) const;
};

struct UeState {
  std::uint32_t ue_id{0};
  SliceId slice{SliceId::embb};
  std::uint64_t queue_bytes{0};
  int cqi{kMinCqi};
  double pf_avg_mbps{kPfEpsilon};
  std::uint64_t tx_bytes{0};
  std::uint64_t tx_packets{0};
  std::uint64_t dropped_bytes{0};
  // Bytes of the head-of-line packet already sent.
  std::uint32_t head_offset{0};
};

/// Cumulative per-slice counters since simulation start.
struct SliceCounters {
  std::uint64_t generated_bytes{0};
  std::uint64_t enqueued_bytes{0};
  std::uint64_t served_bytes{0};
  std::uint64_t tx_packets{0};
  std::uint64_t dropped_bytes{0};
};

struct SliceState {
  SliceId slice{SliceId::embb};
  std::uint32_t prb_quota{0};
  Policy policy{Policy::RR};
  std::vector<std::uint32_t> members;  // UE indices, ascending
  SchedulerState sched{};
  SliceCounters counters{};
};

/// Invariant violations seen by the per-TTI audit.
struct AuditCounters {
  std::uint64_t prb_sum_violations{0};
  std::uint64_t grant_violations{0};
  std::uint64_t byte_violations{0};
};

enum class ControlOutcome { accepted, rejected };

class BaseStation {
 public:
  BaseStation(std::string id, const SimConfig& cfg, std::uint64_t seed);

  const std::string& id() const { return id_; }
  const SimConfig& config() const { return cfg_; }
  std::int64_t now_ms() const { return now_ms_; }

  /// Advances one TTI: arrivals, channel, scheduling, service.
  void step_tti();
  void advance_ms(std::int64_t ms);

  /// Validates and stages a directive; it takes effect at the next TTI
  /// boundary. Rejected directives leave the configuration unchanged.
  ControlOutcome apply_control(const ControlDirective& d);

  const std::vector<UeState>& ues() const { return ues_; }
  const SliceState& slice(SliceId s) const { return slices_[index_of(s)]; }
  std::uint64_t buffer_bytes(SliceId s) const;
  std::uint64_t rejected_controls() const { return rejected_controls_; }
  const AuditCounters& audit() const { return audit_; }
  const std::vector<std::uint32_t>& last_grants() const { return last_grants_; }

  /// Test hook: pins a UE's CQI and disables its channel walk.
  void pin_cqi(std::uint32_t ue, int cqi);

 private:
  void apply_pending();
  void arrivals();
  void channel();
  void serve();

  std::string id_;
  SimConfig cfg_;
  std::mt19937_64 rng_;
  std::int64_t now_ms_{0};
  std::vector<UeState> ues_;
  std::vector<double> arrival_mean_;  // packets per TTI
  std::vector<std::poisson_distribution<std::uint32_t>> arrival_dist_;
  std::vector<bool> cqi_pinned_;
  std::array<SliceState, kNumSlices> slices_{};
  std::optional<std::array<SliceControl, kNumSlices>> pending_;
  std::vector<std::uint32_t> last_grants_;
  std::uint64_t rejected_controls_{0};
  AuditCounters audit_{};
};

/// Turns cumulative slice counters into per-window KPM records. Each consumer
/// (subscriber, dataset writer) owns its own collector.
class KpmCollector {
 public:
  explicit KpmCollector(const BaseStation& bs);

  /// One record per slice covering the window since the previous call.
  std::vector<KpmRecord> collect(const BaseStation& bs);
  std::uint64_t conservation_violations() const { return conservation_violations_; }

 private:
  std::int64_t last_ms_;
  std::array<SliceCounters, kNumSlices> last_{};
  std::array<std::uint64_t, kNumSlices> last_buffer_{};
  std::uint64_t conservation_violations_{0};
};

/// Rounds to three decimals, the precision carried on the wire.
double round3(double v);

using FrameSink = std::function<void(E2Frame)>;

/// RAN-side E2 termination: registers with the RIC, serves subscriptions with
/// periodic KPM indications and applies control directives. Transport
/// agnostic: frames go out through `sink`, come in through handle().
class E2NodeAgent {
 public:
  E2NodeAgent(BaseStation bs, FrameSink sink, std::string ric_id = "ric");

  BaseStation& bs() { return bs_; }
  const BaseStation& bs() const { return bs_; }

  /// Sends the register frame. Call again after a reconnect.
  void start();
  void handle(const E2Frame& frame);
  /// Steps the simulator by `ms`, emitting indications as periods elapse.
  void advance_ms(std::int64_t ms);

  bool registered() const { return registered_; }
  std::size_t subscriber_count() const { return subs_.size(); }
  std::uint64_t indications_sent() const { return indications_sent_; }
  std::uint64_t conservation_violations() const;
  void set_sink(FrameSink sink) { sink_ = std::move(sink); }
  /// Optional tap on every KPM batch emitted (used for run logs).
  void set_kpm_tap(std::function<void(const std::vector<KpmRecord>&)> tap) {
    tap_ = std::move(tap);
  }

 private:
  struct Subscriber {
    std::uint32_t period_ms;
    std::int64_t next_due_ms;
    KpmCollector collector;
  };

  void send(MessageType type, const std::string& dest, std::string payload);

  BaseStation bs_;
  FrameSink sink_;
  std::string ric_id_;
  bool registered_{false};
  std::map<std::string, Subscriber> subs_;
  std::uint64_t indications_sent_{0};
  std::uint64_t retired_violations_{0};
  std::function<void(const std::vector<KpmRecord>&)> tap_;
};

/// Parses a scenario file of `key = value` lines (`#` comments).
SimConfig load_sim_config(const std::string& path);
SimConfig parse_sim_config(std::string_view text);

}  // namespace oran
