#pragma once

// Experiment workflow: data collection campaigns, offline training, the
// lockstep closed-loop evaluation matrix and its summaries.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oran/drl_agent.hpp"
#include "oran/ran_sim.hpp"
#include "oran/ric.hpp"

namespace oran {

struct ExperimentSpec {
  SimConfig sim{};
  std::vector<AgentMode> modes{AgentMode::frozen, AgentMode::finetune};
  std::vector<TrafficKind> traffic{TrafficKind::slice_based, TrafficKind::uniform};
  double duration_s{120.0};
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out_dir{"out"};
  /// Control decisions happen every this many indications per BS.
  std::size_t reports_per_control{4};

  void validate() const;
};

/// Deterministic per-component seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// ---------------------------------------------------------------------------
// Dataset CSV: the eight KPM columns plus the policy in effect.

inline constexpr std::string_view kDatasetHeader =
    "timestamp,bs_id,slice,throughput_mbps,tx_packets,buffer_bytes,prb_alloc,offered_mbps,policy";

std::string format_dataset(std::span<const LoggedWindow> rows);
/// Throws ParseError naming the offending row (1-based, header is row 1).
std::vector<LoggedWindow> parse_dataset(std::string_view text);
void write_dataset(const std::filesystem::path& path, std::span<const LoggedWindow> rows);
std::vector<LoggedWindow> read_dataset(const std::filesystem::path& path);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Random-walk sweep over quota splits and policies. One dataset per BS in
/// the returned order (bs1.csv, bs2.csv, ... under out_dir).
std::vector<std::vector<LoggedWindow>> collect_datasets(const SimConfig& cfg, double duration_s,
                                                        std::uint64_t seed,
                                                        std::size_t reports_per_control = 4);
std::vector<std::filesystem::path> run_collect(const ExperimentSpec& spec);

// ---------------------------------------------------------------------------
// Offline training

struct TrainOptions {
  std::vector<int> layer_sizes{16, 8, 3, 8, 16};
  std::size_t window_rows{4};
  std::size_t window_metrics{4};
  AeTrainOptions ae{};
  int latent_bins{4};
  QHyper q{};
  RewardWeights weights{};
  std::size_t reports_per_control{4};
  /// Exported models must reconstruct below this fraction of data variance.
  double max_relative_mse{0.5};
};

struct ValidationReport {
  double ae_mse{0.0};
  double data_variance{0.0};
  bool ae_ok{false};
  bool toy_mdp_ok{false};
  std::size_t samples{0};
  std::array<std::size_t, kNumSlices> transitions{};

  bool ok() const { return ae_ok && toy_mdp_ok; }
  std::string to_text() const;
};

struct TrainResult {
  ModelBundle bundle;
  ValidationReport report;
};

TrainResult train_bundle(std::span<const std::vector<LoggedWindow>> datasets, const TrainOptions& opt,
                         std::uint64_t seed);

struct ValidationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Trains, writes validation.txt to out_dir and exports the bundle only when
/// validation passes (throws ValidationFailed otherwise).
TrainResult run_train(std::span<const std::filesystem::path> datasets, const TrainOptions& opt,
                      std::uint64_t seed, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Closed-loop evaluation

struct ControlLogEntry {
  std::int64_t timestamp_ms{0};
  ControlDirective directive;
};

struct RunCounters {
  RicStats ric{};
  std::uint64_t rejected_controls{0};
  std::uint64_t prb_sum_violations{0};
  std::uint64_t grant_violations{0};
  std::uint64_t byte_violations{0};
  std::uint64_t conservation_violations{0};
  std::uint64_t controls_sent{0};
  std::uint64_t acks_accepted{0};
  /// Largest gap between an indication and the control it triggered reaching the BS.
  std::int64_t max_loop_latency_ms{0};
};

struct RunLog {
  std::vector<KpmRecord> kpm;
  std::vector<ControlLogEntry> controls;
  RunCounters counters;
};

/// RIC, n_bs simulated base stations and one xApp per BS on a loopback bus,
/// advanced together one report period at a time.
RunLog run_closed_loop(const SimConfig& cfg, const ModelBundle& bundle, AgentMode mode,
                       TrafficKind traffic, double duration_s, std::uint64_t seed,
                       std::size_t reports_per_control = 4);

struct SliceSummary {
  double mean_throughput{0.0};
  double p5_throughput{0.0};
  double p50_throughput{0.0};
  double p95_throughput{0.0};
  double tx_packets_per_s{0.0};
  double mean_buffer{0.0};
  double p95_buffer{0.0};
  double mean_reward{0.0};
};

struct RunSummary {
  std::array<SliceSummary, kNumSlices> slices{};
  std::array<std::vector<std::pair<double, double>>, kNumSlices> pairs;  // (throughput, buffer)
  double aggregate_reward{0.0};
  std::uint64_t windows{0};
};

/// Pure function of the KPM log and the scaling used for rewards.
RunSummary summarize(std::span<const KpmRecord> kpm, const ScalingTable& scaling,
                     std::uint32_t report_period_ms, const RewardWeights& w = {});

/// Pearson correlation; nullopt when either side has zero variance or
/// fewer than two points.
std::optional<double> pearson(std::span<const std::pair<double, double>> xy);

std::string format_control_log(std::span<const ControlLogEntry> log);
std::string format_counters(const RunCounters& c);

std::string cell_name(AgentMode mode, TrafficKind traffic);

/// Runs every (mode, traffic, seed) and writes logs under spec.out_dir, then
/// calls emit_summary. Returns the counters of every run in matrix order.
std::vector<RunCounters> run_eval(const ExperimentSpec& spec, const ModelBundle& bundle);

/// Per-cell aggregate over seeds, as used by the comparison table.
struct CellResult {
  AgentMode mode{AgentMode::frozen};
  TrafficKind traffic{TrafficKind::slice_based};
  std::vector<std::uint64_t> seeds;
  std::vector<RunSummary> runs;

  double median_reward() const;
  double median_mean_buffer(SliceId s) const;
};

/// Re-reads KPM logs under run_dir (plus the autoencoder.model copied
/// there), writes summary.csv / scatter.csv / correlation.csv per cell and
/// comparison.txt. Returns the recomputed cells.
std::vector<CellResult> emit_summary(const std::filesystem::path& run_dir);

double median(std::vector<double> v);

}  // namespace oran
