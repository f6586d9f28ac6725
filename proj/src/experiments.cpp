#include "oran/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "oran/toy_mdp.hpp"
#include "oran/transport.hpp"
#include "oran/xapp_sdk.hpp"

namespace oran {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& content) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

constexpr std::string_view kKpmLogHeader =
    "timestamp,bs_id,slice,throughput_mbps,tx_packets,buffer_bytes,prb_alloc,offered_mbps";

std::string format_kpm_log(std::span<const KpmRecord> kpm) {
  std::string out(kKpmLogHeader);
  out += '\n';
  for (const auto& r : kpm) {
    out += format_kpm_row(r);
    out += '\n';
  }
  return out;
}

std::vector<KpmRecord> parse_kpm_log(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty() || lines[0] != kKpmLogHeader) throw ParseError("kpm log: bad header", 1);
  std::vector<KpmRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    out.push_back(parse_kpm_fields(split(lines[i], ','), i + 1));
  }
  return out;
}

}  // namespace

void ExperimentSpec::validate() const {
  sim.validate();
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (modes.empty() || traffic.empty()) throw std::invalid_argument("empty experiment matrix");
  if (reports_per_control == 0) throw std::invalid_argument("reports_per_control must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------

std::string format_dataset(std::span<const LoggedWindow> rows) {
  std::string out(kDatasetHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_kpm_row(r.kpm);
    out += ',';
    out += to_string(r.policy);
    out += '\n';
  }
  return out;
}

std::vector<LoggedWindow> parse_dataset(std::string_view text) {
  auto lines = lines_of(text);
  if (lines.empty() || lines[0] != kDatasetHeader) throw ParseError("dataset: missing or bad header", 1);
  std::vector<LoggedWindow> out;
  out.reserve(lines.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = split(lines[i], ',');
    if (fields.size() != 9) {
      throw ParseError("dataset row " + std::to_string(i + 1) + ": expected 9 fields, got " +
                           std::to_string(fields.size()),
                       i + 1);
    }
    auto policy = parse_policy(fields[8]);
    if (!policy) {
      throw ParseError("dataset row " + std::to_string(i + 1) + ": unknown policy '" +
                           std::string(fields[8]) + "'",
                       i + 1, 9);
    }
    fields.pop_back();
    out.push_back({parse_kpm_fields(fields, i + 1), *policy});
  }
  return out;
}

void write_dataset(const fs::path& path, std::span<const LoggedWindow> rows) {
  write_text(path, format_dataset(rows));
}

std::vector<LoggedWindow> read_dataset(const fs::path& path) { return parse_dataset(read_text(path)); }

std::vector<std::vector<LoggedWindow>> collect_datasets(const SimConfig& cfg, double duration_s,
                                                        std::uint64_t seed,
                                                        std::size_t reports_per_control) {
  cfg.validate();
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  const auto windows = static_cast<std::size_t>(duration_s * 1000.0 / cfg.report_period_ms);
  std::vector<std::vector<LoggedWindow>> out;
  for (std::uint32_t b = 0; b < cfg.n_bs; ++b) {
    BaseStation bs(cfg.bs_name(b), cfg, derive_seed(seed, 1, b));
    KpmCollector collector(bs);
    std::mt19937_64 rng(derive_seed(seed, 3, b));
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    std::vector<LoggedWindow> rows;
    rows.reserve(windows * kNumSlices);
    for (std::size_t w = 1; w <= windows; ++w) {
      bs.advance_ms(cfg.report_period_ms);
      for (const auto& r : collector.collect(bs)) rows.push_back({r, bs.slice(r.slice).policy});
      if (w % reports_per_control != 0) continue;
      std::array<int, kNumSlices> deltas{};
      std::array<std::uint32_t, kNumSlices> quotas{};
      std::array<double, kNumSlices> backlog{};
      ControlDirective d;
      d.bs_id = bs.id();
      for (auto s : kAllSlices) {
        const auto a = action_from_id(pick(rng));
        deltas[index_of(s)] = a.prb_delta;
        quotas[index_of(s)] = bs.slice(s).prb_quota;
        backlog[index_of(s)] =
            static_cast<double>(bs.buffer_bytes(s)) / static_cast<double>(cfg.queue_cap_bytes);
        d[s].policy = a.policy;
      }
      const auto split_prbs = reconcile_prbs(deltas, quotas, cfg.total_prbs, backlog);
      for (auto s : kAllSlices) d[s].prb_count = split_prbs[index_of(s)];
      bs.apply_control(d);
    }
    out.push_back(std::move(rows));
  }
  return out;
}

std::vector<fs::path> run_collect(const ExperimentSpec& spec) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(spec.out_dir, ec);
  if (ec || !fs::is_directory(spec.out_dir)) {
    throw IoError("cannot create output directory '" + spec.out_dir.string() + "'");
  }
  auto sim = spec.sim;
  if (!spec.traffic.empty()) sim.traffic.kind = spec.traffic.front();
  auto data = collect_datasets(sim, spec.duration_s, spec.seeds.front(), spec.reports_per_control);
  std::vector<fs::path> paths;
  for (std::size_t b = 0; b < data.size(); ++b) {
    auto p = spec.out_dir / (sim.bs_name(static_cast<std::uint32_t>(b)) + ".csv");
    write_dataset(p, data[b]);
    paths.push_back(p);
  }
  return paths;
}

// ---------------------------------------------------------------------------

std::string ValidationReport::to_text() const {
  std::string out;
  out += "samples " + std::to_string(samples) + "\n";
  out += "ae_mse " + fixed6(ae_mse) + "\n";
  out += "data_variance " + fixed6(data_variance) + "\n";
  out += "ae_relative_mse " + fixed6(data_variance > 0 ? ae_mse / data_variance : 0.0) + "\n";
  out += std::string("ae_check ") + (ae_ok ? "pass" : "fail") + "\n";
  out += std::string("toy_mdp_check ") + (toy_mdp_ok ? "pass" : "fail") + "\n";
  for (auto s : kAllSlices) {
    out += "transitions_" + std::string(to_string(s)) + " " + std::to_string(transitions[index_of(s)]) + "\n";
  }
  out += std::string("result ") + (ok() ? "pass" : "fail") + "\n";
  return out;
}

TrainResult train_bundle(std::span<const std::vector<LoggedWindow>> datasets, const TrainOptions& opt,
                         std::uint64_t seed) {
  if (datasets.empty()) throw std::invalid_argument("no datasets");
  const std::size_t T = opt.window_rows;
  const std::size_t M = opt.window_metrics;
  if (opt.layer_sizes.empty() || static_cast<std::size_t>(opt.layer_sizes.front()) != T * M) {
    throw std::invalid_argument("autoencoder input size must equal window_rows * window_metrics");
  }
  if (M > kNumMetrics) throw std::invalid_argument("window_metrics exceeds the metric count");

  std::vector<KpmRecord> all;
  // Per dataset and slice, the rows in time order.
  std::vector<std::array<std::vector<LoggedWindow>, kNumSlices>> per_slice(datasets.size());
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (const auto& row : datasets[d]) {
      all.push_back(row.kpm);
      per_slice[d][index_of(row.kpm.slice)].push_back(row);
    }
  }
  if (all.empty()) throw std::invalid_argument("datasets contain no rows");

  TrainResult result;
  auto& bundle = result.bundle;
  bundle.ae.scaling = fit_scaling(all);
  bundle.ae.window_rows = T;
  bundle.ae.window_metrics = M;

  // Every window of every (BS, slice) series, scaled and flattened.
  std::array<std::vector<Eigen::VectorXd>, kNumSlices> samples;
  for (const auto& series : per_slice) {
    for (auto s : kAllSlices) {
      const auto& rows = series[index_of(s)];
      std::vector<KpmRecord> kpm;
      for (const auto& r : rows) kpm.push_back(r.kpm);
      const auto& ranges = bundle.ae.scaling.ranges[index_of(s)];
      for (std::size_t i = 0; i < kpm.size(); ++i) {
        auto w = extract_and_reshape(std::span<const KpmRecord>(kpm.data(), i + 1), T, M);
        samples[index_of(s)].push_back(scale(w, std::span<const ScaleRange>(ranges.data(), M)).flatten());
      }
    }
  }
  std::size_t n = 0;
  for (const auto& v : samples) n += v.size();
  Eigen::MatrixXd data(static_cast<Eigen::Index>(T * M), static_cast<Eigen::Index>(n));
  Eigen::Index col = 0;
  for (const auto& v : samples) {
    for (const auto& x : v) data.col(col++) = x;
  }
  result.report.samples = n;
  const Eigen::VectorXd mean = data.rowwise().mean();
  result.report.data_variance = (data.colwise() - mean).squaredNorm() / static_cast<double>(data.size());

  auto ae_opt = opt.ae;
  ae_opt.seed = derive_seed(seed, 10, 0);
  auto trained = ae_train<double>(data, opt.layer_sizes, ae_opt);
  bundle.ae.model = std::move(trained.model);
  result.report.ae_mse = trained.final_mse;
  result.report.ae_ok = std::isfinite(trained.final_mse) &&
                        trained.final_mse < opt.max_relative_mse * result.report.data_variance;

  const int L = bundle.ae.model.latent_dim();
  for (auto s : kAllSlices) {
    const auto& v = samples[index_of(s)];
    Eigen::MatrixXd latents(L, static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      latents.col(static_cast<Eigen::Index>(i)) = ae_forward(bundle.ae.model, v[i]).latent;
    }
    auto edges = fit_bin_edges(latents, opt.latent_bins);
    bundle.tables[index_of(s)] = QTable(edges.state_count(), kNumActions, opt.q);
    bundle.tables[index_of(s)].edges = std::move(edges);
  }

  for (auto s : kAllSlices) {
    std::vector<Transition> transitions;
    for (const auto& series : per_slice) {
      auto t = extract_transitions(series[index_of(s)], s, bundle, opt.reports_per_control, opt.weights);
      transitions.insert(transitions.end(), t.begin(), t.end());
    }
    result.report.transitions[index_of(s)] = transitions.size();
    auto& table = bundle.tables[index_of(s)];
    auto edges = table.edges;
    table = offline_train(transitions, table.states(), opt.q, derive_seed(seed, 11, index_of(s)));
    table.edges = std::move(edges);
  }

  result.report.toy_mdp_ok = toy_mdp_check(opt.q);
  return result;
}

TrainResult run_train(std::span<const fs::path> datasets, const TrainOptions& opt, std::uint64_t seed,
                      const fs::path& out_dir) {
  std::vector<std::vector<LoggedWindow>> data;
  for (const auto& p : datasets) {
    try {
      data.push_back(read_dataset(p));
    } catch (const ParseError& e) {
      throw ParseError(p.string() + ": " + e.what(), e.row(), e.field());
    }
  }
  auto result = train_bundle(data, opt, seed);
  write_text(out_dir / "validation.txt", result.report.to_text());
  if (!result.report.ok()) {
    throw ValidationFailed("validation failed, bundle not exported:\n" + result.report.to_text());
  }
  save_bundle(out_dir.string(), result.bundle);
  return result;
}

// ---------------------------------------------------------------------------

RunLog run_closed_loop(const SimConfig& base, const ModelBundle& bundle, AgentMode mode,
                       TrafficKind traffic, double duration_s, std::uint64_t seed,
                       std::size_t reports_per_control) {
  SimConfig cfg = base;
  cfg.traffic.kind = traffic;
  cfg.validate();
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  if (reports_per_control == 0) throw std::invalid_argument("reports_per_control must be positive");

  RunLog log;
  std::int64_t now = 0;
  LoopbackBus bus([&now] { return now; });
  const std::uint32_t n = cfg.n_bs;

  std::vector<std::unique_ptr<E2NodeAgent>> nodes;
  std::vector<ConnId> node_conn(n, 0);
  std::vector<std::int64_t> decided_at(n, 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    nodes.push_back(std::make_unique<E2NodeAgent>(
        BaseStation(cfg.bs_name(i), cfg, derive_seed(seed, 1, i)),
        [&bus, &node_conn, i](E2Frame f) { bus.send(node_conn[i], f); }));
    auto* node = nodes.back().get();
    node->set_kpm_tap([&log](const std::vector<KpmRecord>& r) { log.kpm.insert(log.kpm.end(), r.begin(), r.end()); });
    node_conn[i] = bus.connect([node, &log, &decided_at, i](const E2Frame& f) {
      if (f.type == MessageType::Control) {
        log.counters.max_loop_latency_ms =
            std::max(log.counters.max_loop_latency_ms, node->bs().now_ms() - decided_at[i]);
      }
      node->handle(f);
    });
  }

  std::vector<std::unique_ptr<XAppConnector>> xapps;
  std::vector<std::unique_ptr<SliceAgents>> brains;
  std::vector<ConnId> xapp_conn(n, 0);
  std::vector<std::uint64_t> seen(n, 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    xapps.push_back(std::make_unique<XAppConnector>(
        "xapp" + std::to_string(i + 1), [&bus, &xapp_conn, i](E2Frame f) { bus.send(xapp_conn[i], f); },
        bundle.T()));
    brains.push_back(std::make_unique<SliceAgents>(bundle, mode, derive_seed(seed, 2, i)));
    auto* conn = xapps.back().get();
    auto* brain = brains.back().get();
    conn->on_indication([&, conn, brain, i](const std::string& bs_id) {
      if (++seen[i] % reports_per_control != 0) return;
      auto d = brain->online_step(*conn, bs_id, cfg.total_prbs);
      if (!d) return;
      const auto* latest = conn->latest(bs_id, SliceId::embb);
      decided_at[i] = latest ? latest->timestamp_ms : now;
      log.controls.push_back({decided_at[i], *d});
      conn->send_control(*d);
    });
    xapp_conn[i] = bus.connect([conn](const E2Frame& f) { conn->handle(f); });
  }

  for (auto& node : nodes) node->start();
  bus.pump();
  for (std::uint32_t i = 0; i < n; ++i) {
    xapps[i]->connect_and_subscribe({cfg.bs_name(i)}, cfg.report_period_ms);
  }
  bus.pump();

  const auto end_ms = static_cast<std::int64_t>(std::llround(duration_s * 1000.0));
  for (std::int64_t t = cfg.report_period_ms; t <= end_ms; t += cfg.report_period_ms) {
    now = t;
    for (auto& node : nodes) node->advance_ms(cfg.report_period_ms);
    bus.pump();
  }

  auto& c = log.counters;
  c.ric = bus.ric().stats();
  for (const auto& node : nodes) {
    c.rejected_controls += node->bs().rejected_controls();
    c.prb_sum_violations += node->bs().audit().prb_sum_violations;
    c.grant_violations += node->bs().audit().grant_violations;
    c.byte_violations += node->bs().audit().byte_violations;
    c.conservation_violations += node->conservation_violations();
  }
  for (const auto& x : xapps) {
    c.controls_sent += x->controls_sent();
    c.acks_accepted += x->acks_accepted();
  }
  return log;
}

// ---------------------------------------------------------------------------

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  return percentile(std::move(v), 0.5);
}

std::optional<double> pearson(std::span<const std::pair<double, double>> xy) {
  if (xy.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : xy) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(xy.size());
  my /= static_cast<double>(xy.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& [x, y] : xy) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

RunSummary summarize(std::span<const KpmRecord> kpm, const ScalingTable& scaling,
                     std::uint32_t report_period_ms, const RewardWeights& w) {
  RunSummary out;
  std::array<std::vector<double>, kNumSlices> thr, buf;
  std::array<double, kNumSlices> pkts{}, rew{};
  std::set<std::pair<std::string, std::int64_t>> windows;
  double total_reward = 0.0;
  for (const auto& r : kpm) {
    const auto i = index_of(r.slice);
    thr[i].push_back(r.dl_throughput_mbps);
    buf[i].push_back(static_cast<double>(r.buffer_bytes));
    pkts[i] += static_cast<double>(r.tx_packets);
    const double rw = reward(r.slice, r, w, scaling);
    rew[i] += rw;
    total_reward += rw;
    out.pairs[i].emplace_back(r.dl_throughput_mbps, static_cast<double>(r.buffer_bytes));
    windows.emplace(r.bs_id, r.timestamp_ms);
  }
  out.windows = windows.size();
  out.aggregate_reward = windows.empty() ? 0.0 : total_reward / static_cast<double>(windows.size());
  const double period_s = report_period_ms / 1000.0;
  for (auto s : kAllSlices) {
    const auto i = index_of(s);
    auto& sum = out.slices[i];
    const auto count = static_cast<double>(thr[i].size());
    if (thr[i].empty()) continue;
    sum.mean_throughput = std::accumulate(thr[i].begin(), thr[i].end(), 0.0) / count;
    sum.p5_throughput = percentile(thr[i], 0.05);
    sum.p50_throughput = percentile(thr[i], 0.5);
    sum.p95_throughput = percentile(thr[i], 0.95);
    sum.tx_packets_per_s = pkts[i] / count / period_s;
    sum.mean_buffer = std::accumulate(buf[i].begin(), buf[i].end(), 0.0) / count;
    sum.p95_buffer = percentile(buf[i], 0.95);
    sum.mean_reward = rew[i] / count;
  }
  return out;
}

std::string format_control_log(std::span<const ControlLogEntry> log) {
  std::string out = "timestamp,directive\n";
  for (const auto& e : log) {
    out += std::to_string(e.timestamp_ms) + "," + serialize_control_payload(e.directive) + "\n";
  }
  return out;
}

std::string format_counters(const RunCounters& c) {
  std::string out;
  auto put = [&out](const char* k, auto v) { out += std::string(k) + "=" + std::to_string(v) + "\n"; };
  put("ric_accepted", c.ric.accepted);
  put("ric_delivered", c.ric.delivered);
  put("ric_dropped", c.ric.dropped);
  put("ric_unroutable", c.ric.unroutable);
  put("ric_rejected_registrations", c.ric.rejected_registrations);
  put("subscriptions_accepted", c.ric.subscriptions_accepted);
  put("subscriptions_rejected", c.ric.subscriptions_rejected);
  put("rejected_controls", c.rejected_controls);
  put("prb_sum_violations", c.prb_sum_violations);
  put("grant_violations", c.grant_violations);
  put("byte_violations", c.byte_violations);
  put("conservation_violations", c.conservation_violations);
  put("controls_sent", c.controls_sent);
  put("acks_accepted", c.acks_accepted);
  put("max_loop_latency_ms", c.max_loop_latency_ms);
  return out;
}

std::string cell_name(AgentMode mode, TrafficKind traffic) {
  return std::string(to_string(mode)) + "_" + std::string(to_string(traffic));
}

std::vector<RunCounters> run_eval(const ExperimentSpec& spec, const ModelBundle& bundle) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(spec.out_dir, ec);
  if (ec || !fs::is_directory(spec.out_dir)) {
    throw IoError("cannot create output directory '" + spec.out_dir.string() + "'");
  }
  write_text(spec.out_dir / "autoencoder.model", format_model(bundle.ae));
  std::string meta = "report_period_ms=" + std::to_string(spec.sim.report_period_ms) + "\n";
  meta += "duration_s=" + fixed6(spec.duration_s) + "\n";
  write_text(spec.out_dir / "run.txt", meta);

  std::vector<RunCounters> counters;
  for (auto mode : spec.modes) {
    for (auto traffic : spec.traffic) {
      const auto cell = spec.out_dir / cell_name(mode, traffic);
      for (auto seed : spec.seeds) {
        auto log = run_closed_loop(spec.sim, bundle, mode, traffic, spec.duration_s, seed,
                                   spec.reports_per_control);
        const auto dir = cell / ("seed" + std::to_string(seed));
        write_text(dir / "kpm.csv", format_kpm_log(log.kpm));
        write_text(dir / "control.csv", format_control_log(log.controls));
        write_text(dir / "counters.txt", format_counters(log.counters));
        counters.push_back(log.counters);
      }
    }
  }
  emit_summary(spec.out_dir);
  return counters;
}

double CellResult::median_reward() const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.aggregate_reward);
  return median(std::move(v));
}

double CellResult::median_mean_buffer(SliceId s) const {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.slices[index_of(s)].mean_buffer);
  return median(std::move(v));
}

namespace {

std::map<std::string, std::string> read_key_values(const fs::path& p) {
  std::map<std::string, std::string> out;
  const auto text = read_text(p);
  for (auto line : lines_of(text)) {
    auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::uint64_t> seeds_in(const fs::path& cell) {
  std::vector<std::uint64_t> seeds;
  for (const auto& e : fs::directory_iterator(cell)) {
    const auto name = e.path().filename().string();
    if (!e.is_directory() || name.rfind("seed", 0) != 0) continue;
    try {
      seeds.push_back(std::stoull(name.substr(4)));
    } catch (const std::exception&) {
    }
  }
  std::sort(seeds.begin(), seeds.end());
  return seeds;
}

}  // namespace

std::vector<CellResult> emit_summary(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw IoError("run directory '" + run_dir.string() + "' not found");
  const auto model = parse_model(read_text(run_dir / "autoencoder.model"));
  const auto meta = read_key_values(run_dir / "run.txt");
  auto it = meta.find("report_period_ms");
  if (it == meta.end()) throw IoError("run.txt lacks report_period_ms");
  const auto period = static_cast<std::uint32_t>(std::stoul(it->second));

  std::vector<CellResult> cells;
  for (auto mode : {AgentMode::frozen, AgentMode::finetune}) {
    for (auto traffic : {TrafficKind::slice_based, TrafficKind::uniform}) {
      const auto dir = run_dir / cell_name(mode, traffic);
      if (!fs::is_directory(dir)) continue;
      CellResult cell{mode, traffic, seeds_in(dir), {}};
      if (cell.seeds.empty()) throw IoError("no seed runs under '" + dir.string() + "'");

      std::string summary =
          "seed,slice,mean_throughput_mbps,p5_throughput_mbps,p50_throughput_mbps,p95_throughput_mbps,"
          "tx_packets_per_s,mean_buffer_bytes,p95_buffer_bytes,mean_reward,aggregate_reward\n";
      std::string scatter = "seed,slice,throughput_mbps,buffer_bytes\n";
      std::array<std::vector<std::pair<double, double>>, kNumSlices> pooled;
      for (auto seed : cell.seeds) {
        const auto kpm = parse_kpm_log(read_text(dir / ("seed" + std::to_string(seed)) / "kpm.csv"));
        auto run = summarize(kpm, model.scaling, period);
        for (auto s : kAllSlices) {
          const auto& ss = run.slices[index_of(s)];
          summary += std::to_string(seed) + "," + std::string(to_string(s)) + "," +
                     fixed6(ss.mean_throughput) + "," + fixed6(ss.p5_throughput) + "," +
                     fixed6(ss.p50_throughput) + "," + fixed6(ss.p95_throughput) + "," +
                     fixed6(ss.tx_packets_per_s) + "," + fixed6(ss.mean_buffer) + "," +
                     fixed6(ss.p95_buffer) + "," + fixed6(ss.mean_reward) + "," +
                     fixed6(run.aggregate_reward) + "\n";
          for (const auto& [x, y] : run.pairs[index_of(s)]) {
            scatter += std::to_string(seed) + "," + std::string(to_string(s)) + "," + fixed6(x) + "," +
                       fixed6(y) + "\n";
          }
          auto& p = pooled[index_of(s)];
          p.insert(p.end(), run.pairs[index_of(s)].begin(), run.pairs[index_of(s)].end());
        }
        cell.runs.push_back(std::move(run));
      }
      std::string corr = "slice,pearson_throughput_buffer\n";
      for (auto s : kAllSlices) {
        auto r = pearson(pooled[index_of(s)]);
        corr += std::string(to_string(s)) + "," + (r ? fixed6(*r) : std::string("undefined")) + "\n";
      }
      write_text(dir / "summary.csv", summary);
      write_text(dir / "scatter.csv", scatter);
      write_text(dir / "correlation.csv", corr);
      cells.push_back(std::move(cell));
    }
  }
  if (cells.empty()) throw IoError("no evaluation cells under '" + run_dir.string() + "'");

  std::string table;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %6s %10s %10s %10s %10s %12s %12s %8s\n", "cell", "seeds",
                "reward", "embb_mbps", "mtc_pps", "urllc_mbps", "urllc_buf_B", "embb_buf_B", "drops");
  table += line;
  for (const auto& c : cells) {
    auto med = [&c](auto f) {
      std::vector<double> v;
      for (const auto& r : c.runs) v.push_back(f(r));
      return median(std::move(v));
    };
    std::uint64_t drops = 0;
    const auto dir = run_dir / cell_name(c.mode, c.traffic);
    for (auto seed : c.seeds) {
      const auto counters = dir / ("seed" + std::to_string(seed)) / "counters.txt";
      if (!fs::exists(counters)) continue;
      auto kv = read_key_values(counters);
      if (auto d = kv.find("ric_dropped"); d != kv.end()) drops += std::stoull(d->second);
    }
    std::snprintf(line, sizeof line, "%-22s %6zu %10.4f %10.3f %10.1f %10.3f %12.0f %12.0f %8llu\n",
                  cell_name(c.mode, c.traffic).c_str(), c.seeds.size(), c.median_reward(),
                  med([](const RunSummary& r) { return r.slices[0].mean_throughput; }),
                  med([](const RunSummary& r) { return r.slices[1].tx_packets_per_s; }),
                  med([](const RunSummary& r) { return r.slices[2].mean_throughput; }),
                  c.median_mean_buffer(SliceId::urllc), c.median_mean_buffer(SliceId::embb),
                  static_cast<unsigned long long>(drops));
    table += line;
  }
  table += "\nmedians over seeds; reward = mean per-window sum of slice rewards\n";
  write_text(run_dir / "comparison.txt", table);
  return cells;
}

}  // namespace oran
