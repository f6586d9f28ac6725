#include "oran/xapp_sdk.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace oran {

namespace {

constexpr std::array<std::string_view, kNumMetrics> kMetricNames{
    "throughput", "tx_packets", "buffer_bytes", "prb_alloc", "offered_load"};

}  // namespace

double metric_value(const KpmRecord& r, Metric m) {
  switch (m) {
    case Metric::throughput: return r.dl_throughput_mbps;
    case Metric::tx_packets: return static_cast<double>(r.tx_packets);
    case Metric::buffer_bytes: return static_cast<double>(r.buffer_bytes);
    case Metric::prb_alloc: return static_cast<double>(r.prb_alloc);
    case Metric::offered_load: return r.offered_load_mbps;
  }
  return 0.0;
}

Eigen::VectorXd KpmWindow::flatten() const {
  Eigen::VectorXd out(values.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out(k++) = values(i, j);
  }
  return out;
}

KpmWindow extract_and_reshape(std::span<const KpmRecord> history, std::size_t T, std::size_t M) {
  if (M > kNumMetrics) throw std::invalid_argument("at most 5 metrics per window");
  KpmWindow w;
  w.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(M));
  w.padded.assign(T, true);
  const std::size_t real = std::min(T, history.size());
  const std::size_t first_row = T - real;
  const std::size_t first_rec = history.size() - real;
  for (std::size_t k = 0; k < real; ++k) {
    const auto& rec = history[first_rec + k];
    w.padded[first_row + k] = false;
    for (std::size_t m = 0; m < M; ++m) {
      w.values(static_cast<Eigen::Index>(first_row + k), static_cast<Eigen::Index>(m)) =
          metric_value(rec, m);
    }
  }
  return w;
}

double ScaleRange::apply(double x) const { return std::clamp((x - min) / (max - min), 0.0, 1.0); }

void ScalingTable::validate() const {
  for (const auto& slice : ranges) {
    for (const auto& r : slice) {
      if (!(r.max > r.min)) throw std::invalid_argument("scaling range needs max > min");
    }
  }
}

KpmWindow scale(const KpmWindow& window, std::span<const ScaleRange> ranges) {
  if (ranges.size() < static_cast<std::size_t>(window.values.cols())) {
    throw std::invalid_argument("scale: fewer ranges than window columns");
  }
  for (const auto& r : ranges) {
    if (!(r.max > r.min)) throw std::invalid_argument("scale: range needs max > min");
  }
  KpmWindow out = window;
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    if (out.padded[static_cast<std::size_t>(i)]) {
      out.values.row(i).setZero();
      continue;
    }
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
      out.values(i, j) = ranges[static_cast<std::size_t>(j)].apply(out.values(i, j));
    }
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ScalingTable fit_scaling(std::span<const KpmRecord> records, double lo_q, double hi_q) {
  ScalingTable table;
  for (auto s : kAllSlices) {
    for (std::size_t m = 0; m < kNumMetrics; ++m) {
      std::vector<double> col;
      for (const auto& r : records) {
        if (r.slice == s) col.push_back(metric_value(r, m));
      }
      ScaleRange range{percentile(col, lo_q), percentile(col, hi_q)};
      if (!(range.max > range.min)) range.max = range.min + 1.0;
      table.ranges[index_of(s)][m] = range;
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + std::string(s) + "'");
  }
  return v;
}

namespace {

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  for (auto w : split(line, ' ')) {
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

int parse_int(std::string_view s) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string format_model(const AeModelFile& m) {
  std::ostringstream os;
  os << kModelMagic << '\n' << "layers";
  for (int s : m.model.sizes) os << ' ' << s;
  os << "\nwindow " << m.window_rows << ' ' << m.window_metrics << '\n';
  for (auto s : kAllSlices) {
    for (std::size_t k = 0; k < kNumMetrics; ++k) {
      const auto& r = m.scaling.ranges[index_of(s)][k];
      os << "scale " << to_string(s) << ' ' << kMetricNames[k] << ' ' << format_double(r.min) << ' '
         << format_double(r.max) << '\n';
    }
  }
  for (std::size_t k = 0; k < m.model.num_layers(); ++k) {
    const auto& w = m.model.weights[k];
    os << "weights " << k << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) os << (j ? " " : "") << format_double(w(i, j));
      os << '\n';
    }
    const auto& b = m.model.biases[k];
    os << "bias " << k << ' ' << b.size() << '\n';
    for (Eigen::Index i = 0; i < b.size(); ++i) os << (i ? " " : "") << format_double(b(i));
    os << '\n';
  }
  return os.str();
}

AeModelFile parse_model(std::string_view text) {
  auto lines = split(text, '\n');
  std::size_t li = 0;
  auto next = [&]() -> std::string_view {
    while (li < lines.size() && lines[li].empty()) ++li;
    if (li >= lines.size()) throw std::invalid_argument("model file truncated");
    return lines[li++];
  };
  if (next() != kModelMagic) throw std::invalid_argument("not an autoencoder model file (bad header)");

  AeModelFile m;
  auto layer_words = words(next());
  if (layer_words.empty() || layer_words[0] != "layers") throw std::invalid_argument("expected 'layers'");
  std::vector<int> sizes;
  for (std::size_t i = 1; i < layer_words.size(); ++i) sizes.push_back(parse_int(layer_words[i]));
  m.model = AutoencoderD::zeros(sizes);

  auto win = words(next());
  if (win.size() != 3 || win[0] != "window") throw std::invalid_argument("expected 'window T M'");
  m.window_rows = static_cast<std::size_t>(parse_int(win[1]));
  m.window_metrics = static_cast<std::size_t>(parse_int(win[2]));
  if (m.window_rows * m.window_metrics != static_cast<std::size_t>(sizes.front())) {
    throw std::invalid_argument("window T*M does not match the input layer");
  }

  for (std::size_t k = 0; k < kNumSlices * kNumMetrics; ++k) {
    auto w = words(next());
    if (w.size() != 5 || w[0] != "scale") throw std::invalid_argument("expected 'scale' line");
    auto slice = parse_slice_id(w[1]);
    auto metric = std::find(kMetricNames.begin(), kMetricNames.end(), w[2]);
    if (!slice || metric == kMetricNames.end()) throw std::invalid_argument("bad scale line");
    m.scaling.ranges[index_of(*slice)][static_cast<std::size_t>(metric - kMetricNames.begin())] =
        ScaleRange{parse_double(w[3]), parse_double(w[4])};
  }
  m.scaling.validate();

  for (std::size_t k = 0; k < m.model.num_layers(); ++k) {
    auto& w = m.model.weights[k];
    auto head = words(next());
    if (head.size() != 4 || head[0] != "weights" || parse_int(head[1]) != static_cast<int>(k) ||
        parse_int(head[2]) != w.rows() || parse_int(head[3]) != w.cols()) {
      throw std::invalid_argument("bad weights header for layer " + std::to_string(k));
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      auto row = words(next());
      if (static_cast<Eigen::Index>(row.size()) != w.cols()) throw std::invalid_argument("bad weight row");
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = parse_double(row[static_cast<std::size_t>(j)]);
    }
    auto& b = m.model.biases[k];
    auto bh = words(next());
    if (bh.size() != 3 || bh[0] != "bias" || parse_int(bh[2]) != b.size()) {
      throw std::invalid_argument("bad bias header for layer " + std::to_string(k));
    }
    auto vals = words(next());
    if (static_cast<Eigen::Index>(vals.size()) != b.size()) throw std::invalid_argument("bad bias row");
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = parse_double(vals[static_cast<std::size_t>(i)]);
  }
  return m;
}

void save_model(const std::string& path, const AeModelFile& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << format_model(m);
}

AeModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

// ---------------------------------------------------------------------------

XAppConnector::XAppConnector(std::string xapp_id, Sink sink, std::size_t history_depth)
    : id_(std::move(xapp_id)), sink_(std::move(sink)), depth_(std::max<std::size_t>(1, history_depth)) {
  require_identifier(id_);
}

void XAppConnector::send(MessageType type, const std::string& dest, std::string payload) {
  sink_(E2Frame{type, id_, dest, std::move(payload)});
}

void XAppConnector::connect_and_subscribe(const std::vector<std::string>& bs_ids,
                                          std::uint32_t period_ms) {
  send(MessageType::XAppRegister, "ric", "xapp;kpm-consumer");
  for (const auto& bs : bs_ids) {
    subs_[bs] = SubscriptionState::pending;
    send(MessageType::SubscriptionRequest, "ric", serialize_subscription_payload({bs, period_ms}));
  }
}

std::optional<SubscriptionState> XAppConnector::subscription(const std::string& bs_id) const {
  auto it = subs_.find(bs_id);
  if (it == subs_.end()) return std::nullopt;
  return it->second;
}

void XAppConnector::handle(const E2Frame& f) {
  switch (f.type) {
    case MessageType::XAppRegister:
      registered_ = f.payload == "accepted";
      return;
    case MessageType::SubscriptionResponse: {
      try {
        auto resp = parse_subscription_response(f.payload);
        if (resp.accepted) {
          subs_[resp.bs_id] = SubscriptionState::accepted;
        } else {
          subs_[resp.bs_id] = SubscriptionState::rejected;
          rejected_.push_back(resp.bs_id);
        }
      } catch (const ParseError&) {
        ++malformed_;
      }
      return;
    }
    case MessageType::Indication: {
      auto st = subs_.find(f.source_id);
      if (st == subs_.end() || st->second != SubscriptionState::accepted) return;
      std::vector<KpmRecord> records;
      try {
        records = parse_kpm_payload(f.payload);
      } catch (const ParseError&) {
        ++malformed_;
        return;
      }
      for (auto& r : records) {
        auto& buf = buffers_[{r.bs_id, r.slice}];
        buf.push_back(std::move(r));
        while (buf.size() > depth_) buf.pop_front();
      }
      ++indications_;
      if (on_indication_) on_indication_(f.source_id);
      return;
    }
    case MessageType::ControlAck:
      if (f.payload.ends_with(";accepted")) {
        ++acks_accepted_;
      } else {
        ++acks_rejected_;
      }
      return;
    case MessageType::XAppRoute:
      if (on_route_) on_route_(f.source_id, f.payload);
      return;
    default:
      return;
  }
}

bool XAppConnector::has_buffer(const std::string& bs_id) const {
  for (auto s : kAllSlices) {
    if (buffers_.count({bs_id, s})) return true;
  }
  return false;
}

const std::deque<KpmRecord>* XAppConnector::history(const std::string& bs_id, SliceId slice) const {
  auto it = buffers_.find({bs_id, slice});
  return it == buffers_.end() ? nullptr : &it->second;
}

const KpmRecord* XAppConnector::latest(const std::string& bs_id, SliceId slice) const {
  auto* h = history(bs_id, slice);
  return h && !h->empty() ? &h->back() : nullptr;
}

KpmWindow XAppConnector::extract_and_reshape(const std::string& bs_id, SliceId slice,
                                             std::size_t T, std::size_t M) const {
  auto* h = history(bs_id, slice);
  if (!h) return oran::extract_and_reshape({}, T, M);
  std::vector<KpmRecord> recs(h->begin(), h->end());
  return oran::extract_and_reshape(recs, T, M);
}

void XAppConnector::send_control(const ControlDirective& d) {
  ++controls_sent_;
  send(MessageType::Control, d.bs_id, serialize_control_payload(d));
}

void XAppConnector::send_to_xapp(const std::string& dest, std::string payload) {
  send(MessageType::XAppRoute, dest, std::move(payload));
}

}  // namespace oran
