#pragma once

// xApp anatomy: the SM connector (RIC-facing messaging, KPM ring buffers)
// and the data-processing side of the logic unit (extraction, reshaping,
// padding, scaling, model persistence).

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oran/autoencoder.hpp"
#include "oran/e2_wire.hpp"

namespace oran {

/// Per-slice metrics in the order they appear as window columns.
enum class Metric : std::uint8_t { throughput = 0, tx_packets, buffer_bytes, prb_alloc, offered_load };
inline constexpr std::size_t kNumMetrics = 5;

double metric_value(const KpmRecord& r, Metric m);
inline double metric_value(const KpmRecord& r, std::size_t m) {
  return metric_value(r, static_cast<Metric>(m));
}

struct KpmWindow {
  Eigen::MatrixXd values;     // T x M, oldest row first
  std::vector<bool> padded;   // one flag per row

  std::size_t rows() const { return padded.size(); }
  /// Row-major flattening, the autoencoder input layout.
  Eigen::VectorXd flatten() const;
};

/// Last T records as a T x M window; missing leading rows are zero-filled
/// and flagged. Never fails.
KpmWindow extract_and_reshape(std::span<const KpmRecord> history, std::size_t T, std::size_t M);

struct ScaleRange {
  double min{0.0};
  double max{1.0};

  double apply(double x) const;
  friend bool operator==(const ScaleRange&, const ScaleRange&) = default;
};

/// Scaling ranges per (slice, metric), fixed at training time.
struct ScalingTable {
  std::array<std::array<ScaleRange, kNumMetrics>, kNumSlices> ranges{};

  const ScaleRange& at(SliceId s, Metric m) const {
    return ranges[index_of(s)][static_cast<std::size_t>(m)];
  }
  ScaleRange& at(SliceId s, Metric m) { return ranges[index_of(s)][static_cast<std::size_t>(m)]; }
  /// Throws std::invalid_argument if any max <= min.
  void validate() const;

  friend bool operator==(const ScalingTable&, const ScalingTable&) = default;
};

/// Elementwise clamp((x - min) / (max - min), 0, 1) per column; padded rows
/// stay zero. `ranges` must cover the window's columns.
KpmWindow scale(const KpmWindow& window, std::span<const ScaleRange> ranges);

/// Linear-interpolated percentile (q in [0,1]) of `values`.
double percentile(std::vector<double> values, double q);

/// 1st/99th-percentile ranges per (slice, metric) from a dataset. Degenerate
/// columns get max = min + 1.
ScalingTable fit_scaling(std::span<const KpmRecord> records, double lo_q = 0.01, double hi_q = 0.99);

// ---------------------------------------------------------------------------
// Model file: versioned plaintext header, then row-major weights.

inline constexpr std::string_view kModelMagic = "oran-autoencoder v1";

struct AeModelFile {
  AutoencoderD model;
  ScalingTable scaling;
  std::size_t window_rows{4};     // T
  std::size_t window_metrics{4};  // M

  friend bool operator==(const AeModelFile&, const AeModelFile&) = default;
};

std::string format_model(const AeModelFile& m);
AeModelFile parse_model(std::string_view text);
void save_model(const std::string& path, const AeModelFile& m);
AeModelFile load_model(const std::string& path);

/// Shortest decimal that round-trips the double exactly.
std::string format_double(double v);
double parse_double(std::string_view s);

// ---------------------------------------------------------------------------
// SM connector

enum class SubscriptionState { pending, accepted, rejected };

class XAppConnector {
 public:
  using Sink = std::function<void(E2Frame)>;

  XAppConnector(std::string xapp_id, Sink sink, std::size_t history_depth);

  const std::string& id() const { return id_; }

  /// Sends XAppRegister and one SubscriptionRequest per base station.
  void connect_and_subscribe(const std::vector<std::string>& bs_ids, std::uint32_t period_ms);
  void handle(const E2Frame& frame);

  bool registered() const { return registered_; }
  std::optional<SubscriptionState> subscription(const std::string& bs_id) const;
  /// Subscriptions rejected by the RIC, in arrival order.
  const std::vector<std::string>& rejected() const { return rejected_; }

  /// Ring buffer for (bs, slice); null when no data has been accepted.
  const std::deque<KpmRecord>* history(const std::string& bs_id, SliceId slice) const;
  bool has_buffer(const std::string& bs_id) const;
  KpmWindow extract_and_reshape(const std::string& bs_id, SliceId slice, std::size_t T,
                                std::size_t M) const;
  /// Latest record of (bs, slice), if any.
  const KpmRecord* latest(const std::string& bs_id, SliceId slice) const;

  void send_control(const ControlDirective& d);
  void send_to_xapp(const std::string& dest, std::string payload);

  /// Called after each indication has been stored.
  void on_indication(std::function<void(const std::string& bs_id)> cb) { on_indication_ = std::move(cb); }
  /// Called for every XAppRoute message delivered to this xApp.
  void on_route(std::function<void(const std::string& src, const std::string& payload)> cb) {
    on_route_ = std::move(cb);
  }

  std::uint64_t indications() const { return indications_; }
  std::uint64_t controls_sent() const { return controls_sent_; }
  std::uint64_t acks_accepted() const { return acks_accepted_; }
  std::uint64_t acks_rejected() const { return acks_rejected_; }
  std::uint64_t malformed() const { return malformed_; }

 private:
  void send(MessageType type, const std::string& dest, std::string payload);

  std::string id_;
  Sink sink_;
  std::size_t depth_;
  bool registered_{false};
  std::map<std::string, SubscriptionState> subs_;
  std::vector<std::string> rejected_;
  std::map<std::pair<std::string, SliceId>, std::deque<KpmRecord>> buffers_;
  std::function<void(const std::string&)> on_indication_;
  std::function<void(const std::string&, const std::string&)> on_route_;
  std::uint64_t indications_{0};
  std::uint64_t controls_sent_{0};
  std::uint64_t acks_accepted_{0};
  std::uint64_t acks_rejected_{0};
  std::uint64_t malformed_{0};
};

}  // namespace oran
