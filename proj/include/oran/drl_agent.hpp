#pragma once

// Tabular Q-learning over discretized autoencoder latents. One agent per
// slice picks (PRB delta, scheduling policy); reconcile_prbs makes the three
// per-slice choices feasible against the cell's PRB budget.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oran/e2_wire.hpp"
#include "oran/xapp_sdk.hpp"

namespace oran {

inline constexpr int kPrbStep = 2;
inline constexpr int kNumActions = 9;

struct AgentAction {
  int prb_delta{0};  // -kPrbStep, 0 or +kPrbStep
  Policy policy{Policy::RR};

  friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

/// action_id = 3 * delta_index + policy_index, delta_index 0/1/2 = -, 0, +.
int action_id(const AgentAction& a);
AgentAction action_from_id(int id);

/// Quantile bin edges per latent dimension: B-1 ascending interior edges.
struct BinEdges {
  int bins{1};
  std::vector<std::vector<double>> per_dim;

  int dims() const { return static_cast<int>(per_dim.size()); }
  std::size_t state_count() const;
  friend bool operator==(const BinEdges&, const BinEdges&) = default;
};

/// Fits edges at the k/B quantiles (k = 1..B-1) of each row of `latents`
/// (L x N, samples are columns).
BinEdges fit_bin_edges(const Eigen::MatrixXd& latents, int bins);

/// Bin of `value`: number of edges <= value, so out-of-range values clamp to
/// the edge bins.
int bin_index(const std::vector<double>& edges, double value);
/// Mixed-radix state id: sum_k bin_k * B^k.
std::size_t state_from_bins(const std::vector<int>& bins, int base);
std::size_t discretize(const Eigen::VectorXd& latent, const BinEdges& edges);

struct QHyper {
  double learning_rate{0.1};  // eta
  double discount{0.9};       // gamma
  double epsilon_start{0.5};
  double epsilon_end{0.05};
  int epochs{20};

  friend bool operator==(const QHyper&, const QHyper&) = default;
};

class QTable {
 public:
  QTable() = default;
  QTable(std::size_t states, int actions, QHyper hyper = {});

  std::size_t states() const { return states_; }
  int actions() const { return actions_; }
  const QHyper& hyper() const { return hyper_; }
  QHyper& hyper() { return hyper_; }

  double value(std::size_t s, int a) const { return values_[s * actions_ + a]; }
  void set(std::size_t s, int a, double v) { values_[s * actions_ + a] = v; }
  std::uint64_t visits(std::size_t s, int a) const { return visits_[s * actions_ + a]; }
  void set_visits(std::size_t s, int a, std::uint64_t n) { visits_[s * actions_ + a] = n; }
  double max_value(std::size_t s) const;
  /// Greedy action; ties go to the lowest action id.
  int argmax(std::size_t s) const;

  /// Q(s,a) += eta * (r + gamma * max Q(s',.) - Q(s,a)).
  void update(std::size_t s, int a, double reward, std::size_t next);

  BinEdges edges;

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t states_{0};
  int actions_{0};
  QHyper hyper_{};
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
};

/// Epsilon-greedy over the table row of `s`.
int select_action(const QTable& q, std::size_t s, double epsilon, std::mt19937_64& rng);

inline void q_update(QTable& q, std::size_t s, int a, double r, std::size_t next) {
  q.update(s, a, r, next);
}

inline constexpr std::string_view kQTableMagic = "oran-qtable v1";

std::string format_qtable(const QTable& q);
QTable parse_qtable(std::string_view text);

struct RewardWeights {
  double embb{1.0};
  double mtc{1.0};
  double urllc{1.0};

  double of(SliceId s) const;
};

/// Slice objective on scaled metrics: eMBB throughput, MTC transmitted
/// packets, URLLC 1 - buffer occupancy. Each term lies in [0, weight].
double reward(SliceId slice, const KpmRecord& kpm, const RewardWeights& w, const ScalingTable& scaling);

/// Applies per-slice deltas, clamps each slice to >= 2 PRBs and repairs the
/// sum in 2-PRB units (1 PRB for an odd remainder): surplus is taken from the
/// slice with the smallest scaled backlog, deficit given to the largest.
/// Ties resolve in slice order.
std::array<std::uint32_t, kNumSlices> reconcile_prbs(const std::array<int, kNumSlices>& deltas,
                                                     const std::array<std::uint32_t, kNumSlices>& quotas,
                                                     std::uint32_t total,
                                                     const std::array<double, kNumSlices>& scaled_backlog);

// ---------------------------------------------------------------------------
// Model bundle and the xApp logic unit

struct ModelBundle {
  AeModelFile ae;
  std::array<QTable, kNumSlices> tables;

  std::size_t T() const { return ae.window_rows; }
  std::size_t M() const { return ae.window_metrics; }
  /// Scaled, flattened window -> latent -> state id.
  std::size_t encode_state(SliceId slice, const KpmWindow& raw) const;

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

void save_bundle(const std::string& dir, const ModelBundle& b);
ModelBundle load_bundle(const std::string& dir);

/// One dataset row: the window's KPMs and the policy in effect during it.
struct LoggedWindow {
  KpmRecord kpm;
  Policy policy{Policy::RR};

  friend bool operator==(const LoggedWindow&, const LoggedWindow&) = default;
};

struct Transition {
  std::size_t state{0};
  int action{0};
  double reward{0.0};
  std::size_t next{0};
};

/// Windows of `rows` (one BS, one slice, time order) ending on each control
/// boundary, paired with the action that took effect after the boundary.
/// The realized PRB change maps to its sign times kPrbStep.
std::vector<Transition> extract_transitions(std::span<const LoggedWindow> rows, SliceId slice,
                                            const ModelBundle& bundle,
                                            std::size_t reports_per_control,
                                            const RewardWeights& w = {});

/// Replays transitions through q_update for hyper.epochs shuffled passes.
QTable offline_train(std::span<const Transition> transitions, std::size_t states,
                     const QHyper& hyper, std::uint64_t seed);

enum class AgentMode { frozen, finetune };
std::string_view to_string(AgentMode m);
std::optional<AgentMode> parse_agent_mode(std::string_view s);

struct SliceDecision {
  SliceId slice{SliceId::embb};
  std::size_t state{0};
  int action{0};
  double reward{0.0};
};

/// Per-xApp decision logic: three per-slice agents sharing one autoencoder.
/// Owns private copies of the tables; finetune mode updates them in place.
class SliceAgents {
 public:
  SliceAgents(const ModelBundle& bundle, AgentMode mode, std::uint64_t seed,
              RewardWeights weights = {});

  /// One control step for `bs_id` from the connector's buffers. Returns the
  /// feasible directive, or nullopt when no KPM has arrived yet.
  std::optional<ControlDirective> online_step(const XAppConnector& conn, const std::string& bs_id,
                                              std::uint32_t total_prbs);
  /// Single-slice step: reshape, scale, encode, discretize, update, act.
  SliceDecision slice_step(SliceId slice, const KpmWindow& window, const KpmRecord* latest);

  const QTable& table(SliceId s) const { return tables_[index_of(s)]; }
  AgentMode mode() const { return mode_; }
  double epsilon() const { return epsilon_; }

 private:
  const ModelBundle& bundle_;
  AgentMode mode_;
  double epsilon_;
  RewardWeights weights_;
  std::mt19937_64 rng_;
  std::array<QTable, kNumSlices> tables_;
  std::array<std::optional<std::pair<std::size_t, int>>, kNumSlices> prev_{};
};

}  // namespace oran
