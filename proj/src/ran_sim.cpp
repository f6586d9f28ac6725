#include "oran/ran_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace oran {

std::string_view to_string(TrafficKind k) {
  return k == TrafficKind::slice_based ? "slice_based" : "uniform";
}

std::optional<TrafficKind> parse_traffic_kind(std::string_view s) {
  if (s == "slice_based" || s == "slice") return TrafficKind::slice_based;
  if (s == "uniform") return TrafficKind::uniform;
  return std::nullopt;
}

double TrafficProfile::ue_rate_bps(SliceId slice) const {
  if (kind == TrafficKind::uniform) return uniform_mbps * 1e6;
  switch (slice) {
    case SliceId::embb: return embb_mbps * 1e6;
    case SliceId::mtc: return mtc_kbps * 1e3;
    case SliceId::urllc: return urllc_kbps * 1e3;
  }
  return 0.0;
}

SliceId SimConfig::slice_of(std::uint32_t ue) const {
  const std::uint32_t idx = ue * static_cast<std::uint32_t>(kNumSlices) / ues_per_bs;
  return kAllSlices[std::min<std::size_t>(idx, kNumSlices - 1)];
}

void SimConfig::validate() const {
  if (n_bs == 0) throw std::invalid_argument("n_bs must be positive");
  if (ues_per_bs == 0) throw std::invalid_argument("ues_per_bs must be positive");
  if (total_prbs == 0) throw std::invalid_argument("total_prbs must be positive");
  if (tti_ms == 0) throw std::invalid_argument("tti_ms must be positive");
  if (report_period_ms == 0 || report_period_ms % tti_ms != 0) {
    throw std::invalid_argument("report_period_ms must be a positive multiple of tti_ms");
  }
  if (control_period_ms == 0 || control_period_ms % report_period_ms != 0) {
    throw std::invalid_argument("control_period_ms must be a positive multiple of report_period_ms");
  }
  std::uint32_t sum = 0;
  for (const auto& s : initial) sum += s.prb_count;
  if (sum != total_prbs) throw std::invalid_argument("initial PRB split must sum to total_prbs");
  if (cqi_init_min < kMinCqi || cqi_init_max > kMaxCqi || cqi_init_min > cqi_init_max) {
    throw std::invalid_argument("cqi_init range must lie in 1..15");
  }
  if (!(cqi_step_prob >= 0.0 && cqi_step_prob <= 1.0)) {
    throw std::invalid_argument("cqi_step_prob must lie in [0,1]");
  }
}

std::string SimConfig::bs_name(std::uint32_t index) const { return "bs" + std::to_string(index + 1); }

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

// ---------------------------------------------------------------------------

BaseStation::BaseStation(std::string id, const SimConfig& cfg, std::uint64_t seed)
    : id_(std::move(id)), cfg_(cfg), rng_(seed) {
  cfg_.validate();
  require_identifier(id_);
  std::uniform_int_distribution<int> cqi0(cfg_.cqi_init_min, cfg_.cqi_init_max);
  ues_.resize(cfg_.ues_per_bs);
  arrival_mean_.resize(cfg_.ues_per_bs, 0.0);
  arrival_dist_.resize(cfg_.ues_per_bs);
  cqi_pinned_.assign(cfg_.ues_per_bs, false);
  for (std::uint32_t i = 0; i < cfg_.ues_per_bs; ++i) {
    auto& ue = ues_[i];
    ue.ue_id = i;
    ue.slice = cfg_.slice_of(i);
    ue.cqi = cqi0(rng_);
    const double bits_per_tti = cfg_.traffic.ue_rate_bps(ue.slice) * cfg_.tti_ms / 1000.0;
    arrival_mean_[i] = bits_per_tti / (8.0 * packet_bytes(ue.slice));
    if (arrival_mean_[i] > 0.0) {
      arrival_dist_[i] = std::poisson_distribution<std::uint32_t>(arrival_mean_[i]);
    }
    slices_[index_of(ue.slice)].members.push_back(i);
  }
  for (auto s : kAllSlices) {
    auto& st = slices_[index_of(s)];
    st.slice = s;
    st.prb_quota = cfg_.initial[index_of(s)].prb_count;
    st.policy = cfg_.initial[index_of(s)].policy;
  }
  last_grants_.assign(cfg_.ues_per_bs, 0);
}

std::uint64_t BaseStation::buffer_bytes(SliceId s) const {
  std::uint64_t sum = 0;
  for (auto m : slices_[index_of(s)].members) sum += ues_[m].queue_bytes;
  return sum;
}

void BaseStation::pin_cqi(std::uint32_t ue, int cqi) {
  (void)bits_per_prb(cqi);
  ues_.at(ue).cqi = cqi;
  cqi_pinned_.at(ue) = true;
}

ControlOutcome BaseStation::apply_control(const ControlDirective& d) {
  if (d.bs_id != id_ || d.prb_sum() != cfg_.total_prbs) {
    ++rejected_controls_;
    return ControlOutcome::rejected;
  }
  pending_ = d.slices;
  return ControlOutcome::accepted;
}

void BaseStation::apply_pending() {
  if (!pending_) return;
  for (auto s : kAllSlices) {
    auto& st = slices_[index_of(s)];
    st.prb_quota = (*pending_)[index_of(s)].prb_count;
    st.policy = (*pending_)[index_of(s)].policy;
  }
  pending_.reset();
}

void BaseStation::arrivals() {
  for (std::uint32_t i = 0; i < ues_.size(); ++i) {
    if (arrival_mean_[i] <= 0.0) continue;
    auto& ue = ues_[i];
    auto& counters = slices_[index_of(ue.slice)].counters;
    const std::uint32_t size = packet_bytes(ue.slice);
    const std::uint32_t packets = arrival_dist_[i](rng_);
    for (std::uint32_t p = 0; p < packets; ++p) {
      counters.generated_bytes += size;
      if (ue.queue_bytes + size > cfg_.queue_cap_bytes) {
        ue.dropped_bytes += size;
        counters.dropped_bytes += size;
        continue;
      }
      ue.queue_bytes += size;
      counters.enqueued_bytes += size;
    }
  }
}

void BaseStation::channel() {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double half = cfg_.cqi_step_prob / 2.0;
  for (std::uint32_t i = 0; i < ues_.size(); ++i) {
    const double draw = u(rng_);
    if (cqi_pinned_[i]) continue;
    auto& ue = ues_[i];
    if (draw < half) {
      ue.cqi = std::max(kMinCqi, ue.cqi - 1);
    } else if (draw < cfg_.cqi_step_prob) {
      ue.cqi = std::min(kMaxCqi, ue.cqi + 1);
    }
  }
}

void BaseStation::serve() {
  std::uint32_t quota_sum = 0;
  for (auto& st : slices_) quota_sum += st.prb_quota;
  if (quota_sum != cfg_.total_prbs) ++audit_.prb_sum_violations;

  std::fill(last_grants_.begin(), last_grants_.end(), 0u);
  std::vector<std::uint64_t> served(ues_.size(), 0);

  for (auto& st : slices_) {
    ScheduleInput in;
    in.prb_quota = st.prb_quota;
    in.ues.reserve(st.members.size());
    for (auto m : st.members) {
      in.ues.push_back(UeSchedInfo{ues_[m].queue_bytes, ues_[m].cqi, ues_[m].pf_avg_mbps});
    }
    const Grants grants = schedule(st.policy, in, st.sched);

    std::uint64_t granted = 0;
    std::uint64_t slice_capacity = 0;
    std::uint64_t slice_served = 0;
    for (std::size_t k = 0; k < st.members.size(); ++k) {
      const auto m = st.members[k];
      auto& ue = ues_[m];
      const std::uint32_t g = grants[k];
      granted += g;
      if (g > 0 && ue.queue_bytes == 0) ++audit_.grant_violations;
      last_grants_[m] = g;
      const std::uint64_t cap = capacity_bytes(ue.cqi, g);
      const std::uint64_t bytes = std::min(ue.queue_bytes, cap);
      slice_capacity += cap;
      slice_served += bytes;

      const std::uint64_t before = ue.queue_bytes;
      const std::uint32_t size = packet_bytes(ue.slice);
      const std::uint64_t progressed = ue.head_offset + bytes;
      const std::uint64_t completed = progressed / size;
      ue.head_offset = static_cast<std::uint32_t>(progressed % size);
      ue.queue_bytes -= bytes;
      ue.tx_bytes += bytes;
      ue.tx_packets += completed;
      st.counters.served_bytes += bytes;
      st.counters.tx_packets += completed;
      served[m] = bytes;
      if (ue.queue_bytes + bytes != before || (ue.queue_bytes == 0 && ue.head_offset != 0)) {
        ++audit_.byte_violations;
      }
    }
    if (granted > st.prb_quota) ++audit_.grant_violations;
    if (slice_served > slice_capacity) ++audit_.byte_violations;
  }

  for (std::size_t i = 0; i < ues_.size(); ++i) {
    const double mbps = static_cast<double>(served[i]) * 8.0 / (1000.0 * cfg_.tti_ms);
    ues_[i].pf_avg_mbps = update_pf_average(ues_[i].pf_avg_mbps, mbps);
  }
}

void BaseStation::step_tti() {
  apply_pending();
  arrivals();
  channel();
  serve();
  now_ms_ += cfg_.tti_ms;
}

void BaseStation::advance_ms(std::int64_t ms) {
  const std::int64_t end = now_ms_ + ms;
  while (now_ms_ < end) step_tti();
}

// ---------------------------------------------------------------------------

KpmCollector::KpmCollector(const BaseStation& bs) : last_ms_(bs.now_ms()) {
  for (auto s : kAllSlices) {
    last_[index_of(s)] = bs.slice(s).counters;
    last_buffer_[index_of(s)] = bs.buffer_bytes(s);
  }
}

std::vector<KpmRecord> KpmCollector::collect(const BaseStation& bs) {
  std::vector<KpmRecord> out;
  out.reserve(kNumSlices);
  const std::int64_t window_ms = bs.now_ms() - last_ms_;
  // Mbps = bits / (window_ms * 1000)
  const double denom = window_ms > 0 ? static_cast<double>(window_ms) * 1000.0 : 1.0;
  for (auto s : kAllSlices) {
    const auto& st = bs.slice(s);
    const auto& prev = last_[index_of(s)];
    const auto& now = st.counters;
    const std::uint64_t buffer = bs.buffer_bytes(s);

    const std::uint64_t enq = now.enqueued_bytes - prev.enqueued_bytes;
    const std::uint64_t srv = now.served_bytes - prev.served_bytes;
    if (last_buffer_[index_of(s)] + enq != buffer + srv) ++conservation_violations_;

    KpmRecord r;
    r.timestamp_ms = bs.now_ms();
    r.bs_id = bs.id();
    r.slice = s;
    r.dl_throughput_mbps = round3(static_cast<double>(srv) * 8.0 / denom);
    r.tx_packets = now.tx_packets - prev.tx_packets;
    r.buffer_bytes = buffer;
    r.prb_alloc = st.prb_quota;
    r.offered_load_mbps =
        round3(static_cast<double>(now.generated_bytes - prev.generated_bytes) * 8.0 / denom);
    out.push_back(std::move(r));

    last_[index_of(s)] = now;
    last_buffer_[index_of(s)] = buffer;
  }
  last_ms_ = bs.now_ms();
  return out;
}

// ---------------------------------------------------------------------------

E2NodeAgent::E2NodeAgent(BaseStation bs, FrameSink sink, std::string ric_id)
    : bs_(std::move(bs)), sink_(std::move(sink)), ric_id_(std::move(ric_id)) {}

void E2NodeAgent::send(MessageType type, const std::string& dest, std::string payload) {
  if (sink_) sink_(E2Frame{type, bs_.id(), dest, std::move(payload)});
}

void E2NodeAgent::start() {
  registered_ = false;
  send(MessageType::XAppRegister, ric_id_, "e2_node;prbs=" + std::to_string(bs_.config().total_prbs));
}

std::uint64_t E2NodeAgent::conservation_violations() const {
  std::uint64_t v = retired_violations_;
  for (const auto& [id, sub] : subs_) v += sub.collector.conservation_violations();
  return v;
}

void E2NodeAgent::handle(const E2Frame& frame) {
  switch (frame.type) {
    case MessageType::XAppRegister:
      registered_ = frame.source_id == ric_id_ && frame.payload == "accepted";
      break;
    case MessageType::SubscriptionRequest: {
      SubscriptionRequest req;
      try {
        req = parse_subscription_payload(frame.payload);
      } catch (const ParseError&) {
        return;
      }
      if (req.bs_id != bs_.id()) return;
      auto it = subs_.find(frame.source_id);
      if (it != subs_.end()) {
        retired_violations_ += it->second.collector.conservation_violations();
        subs_.erase(it);
      }
      if (req.period_ms > 0) {
        subs_.emplace(frame.source_id,
                      Subscriber{req.period_ms, bs_.now_ms() + req.period_ms, KpmCollector(bs_)});
      }
      break;
    }
    case MessageType::Control: {
      ControlOutcome outcome = ControlOutcome::rejected;
      try {
        outcome = bs_.apply_control(parse_control_payload(frame.payload));
      } catch (const ParseError&) {
      }
      send(MessageType::ControlAck, frame.source_id,
           bs_.id() + (outcome == ControlOutcome::accepted ? ";accepted" : ";rejected"));
      break;
    }
    default:
      break;
  }
}

void E2NodeAgent::advance_ms(std::int64_t ms) {
  const std::int64_t end = bs_.now_ms() + ms;
  while (bs_.now_ms() < end) {
    bs_.step_tti();
    for (auto& [xapp, sub] : subs_) {
      if (bs_.now_ms() < sub.next_due_ms) continue;
      sub.next_due_ms += sub.period_ms;
      auto records = sub.collector.collect(bs_);
      if (tap_) tap_(records);
      send(MessageType::Indication, xapp, serialize_kpm_payload(records));
      ++indications_sent_;
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config key '" + std::string(key) + "': bad number '" +
                                std::string(v) + "'");
  }
  return out;
}

}  // namespace

SimConfig parse_sim_config(std::string_view text) {
  SimConfig cfg;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    auto val = trim(line.substr(eq + 1));
    if (key == "seed") cfg.rng_seed = parse_number<std::uint64_t>(key, val);
    else if (key == "n_bs") cfg.n_bs = parse_number<std::uint32_t>(key, val);
    else if (key == "ues_per_bs") cfg.ues_per_bs = parse_number<std::uint32_t>(key, val);
    else if (key == "total_prbs") cfg.total_prbs = parse_number<std::uint32_t>(key, val);
    else if (key == "tti_ms") cfg.tti_ms = parse_number<std::uint32_t>(key, val);
    else if (key == "report_period_ms") cfg.report_period_ms = parse_number<std::uint32_t>(key, val);
    else if (key == "control_period_ms") cfg.control_period_ms = parse_number<std::uint32_t>(key, val);
    else if (key == "queue_cap_bytes") cfg.queue_cap_bytes = parse_number<std::uint64_t>(key, val);
    else if (key == "cqi_step_prob") cfg.cqi_step_prob = parse_number<double>(key, val);
    else if (key == "cqi_init_min") cfg.cqi_init_min = parse_number<int>(key, val);
    else if (key == "cqi_init_max") cfg.cqi_init_max = parse_number<int>(key, val);
    else if (key == "embb_mbps") cfg.traffic.embb_mbps = parse_number<double>(key, val);
    else if (key == "mtc_kbps") cfg.traffic.mtc_kbps = parse_number<double>(key, val);
    else if (key == "urllc_kbps") cfg.traffic.urllc_kbps = parse_number<double>(key, val);
    else if (key == "uniform_mbps") cfg.traffic.uniform_mbps = parse_number<double>(key, val);
    else if (key == "ric_host") cfg.ric_host = std::string(val);
    else if (key == "ric_port") cfg.ric_port = parse_number<std::uint16_t>(key, val);
    else if (key == "traffic") {
      auto k = parse_traffic_kind(val);
      if (!k) throw std::invalid_argument("config key 'traffic': expected slice_based|uniform");
      cfg.traffic.kind = *k;
    } else if (key == "initial_prbs") {
      auto parts = split(val, ',');
      if (parts.size() != kNumSlices) throw std::invalid_argument("initial_prbs needs 3 values");
      for (std::size_t i = 0; i < kNumSlices; ++i) {
        cfg.initial[i].prb_count = parse_number<std::uint32_t>(key, trim(parts[i]));
      }
    } else if (key == "initial_policies") {
      auto parts = split(val, ',');
      if (parts.size() != kNumSlices) throw std::invalid_argument("initial_policies needs 3 values");
      for (std::size_t i = 0; i < kNumSlices; ++i) {
        auto p = parse_policy(trim(parts[i]));
        if (!p) throw std::invalid_argument("initial_policies: expected RR|WF|PF");
        cfg.initial[i].policy = *p;
      }
    } else {
      throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sim_config(ss.str());
}

}  // namespace oran
