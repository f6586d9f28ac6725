#include "oran/drl_agent.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace oran {

int action_id(const AgentAction& a) {
  const int delta_index = a.prb_delta < 0 ? 0 : (a.prb_delta == 0 ? 1 : 2);
  return delta_index * 3 + static_cast<int>(a.policy);
}

AgentAction action_from_id(int id) {
  if (id < 0 || id >= kNumActions) throw std::out_of_range("action id out of range");
  static constexpr std::array<int, 3> kDeltas{-kPrbStep, 0, kPrbStep};
  return {kDeltas[static_cast<std::size_t>(id / 3)], kAllPolicies[static_cast<std::size_t>(id % 3)]};
}

// ---------------------------------------------------------------------------

std::size_t BinEdges::state_count() const {
  std::size_t n = 1;
  for (int d = 0; d < dims(); ++d) n *= static_cast<std::size_t>(bins);
  return n;
}

BinEdges fit_bin_edges(const Eigen::MatrixXd& latents, int bins) {
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  BinEdges e;
  e.bins = bins;
  e.per_dim.resize(static_cast<std::size_t>(latents.rows()));
  for (Eigen::Index d = 0; d < latents.rows(); ++d) {
    std::vector<double> col;
    col.reserve(static_cast<std::size_t>(latents.cols()));
    for (Eigen::Index j = 0; j < latents.cols(); ++j) col.push_back(latents(d, j));
    auto& edges = e.per_dim[static_cast<std::size_t>(d)];
    for (int k = 1; k < bins; ++k) {
      edges.push_back(col.empty() ? 0.0 : percentile(col, static_cast<double>(k) / bins));
    }
  }
  return e;
}

int bin_index(const std::vector<double>& edges, double value) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

std::size_t state_from_bins(const std::vector<int>& bins, int base) {
  std::size_t id = 0;
  std::size_t radix = 1;
  for (int b : bins) {
    id += static_cast<std::size_t>(b) * radix;
    radix *= static_cast<std::size_t>(base);
  }
  return id;
}

std::size_t discretize(const Eigen::VectorXd& latent, const BinEdges& edges) {
  if (latent.size() != edges.dims()) throw std::invalid_argument("latent size != bin edge dims");
  std::vector<int> bins(static_cast<std::size_t>(latent.size()));
  for (Eigen::Index d = 0; d < latent.size(); ++d) {
    bins[static_cast<std::size_t>(d)] = bin_index(edges.per_dim[static_cast<std::size_t>(d)], latent(d));
  }
  return state_from_bins(bins, edges.bins);
}

// ---------------------------------------------------------------------------

QTable::QTable(std::size_t states, int actions, QHyper hyper)
    : states_(states),
      actions_(actions),
      hyper_(hyper),
      values_(states * static_cast<std::size_t>(actions), 0.0),
      visits_(states * static_cast<std::size_t>(actions), 0) {
  if (actions <= 0) throw std::invalid_argument("QTable needs at least one action");
}

double QTable::max_value(std::size_t s) const {
  const auto* row = &values_[s * actions_];
  return *std::max_element(row, row + actions_);
}

int QTable::argmax(std::size_t s) const {
  const auto* row = &values_[s * actions_];
  // max_element returns the first maximum: lowest action id on ties.
  return static_cast<int>(std::max_element(row, row + actions_) - row);
}

void QTable::update(std::size_t s, int a, double reward, std::size_t next) {
  if (s >= states_ || next >= states_ || a < 0 || a >= actions_) {
    throw std::out_of_range("q_update index out of range");
  }
  const double target = reward + hyper_.discount * max_value(next);
  auto& q = values_[s * actions_ + a];
  q += hyper_.learning_rate * (target - q);
  ++visits_[s * actions_ + a];
}

int select_action(const QTable& q, std::size_t s, double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (epsilon > 0.0 && coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, q.actions() - 1);
    return pick(rng);
  }
  return q.argmax(s);
}

std::string format_qtable(const QTable& q) {
  std::ostringstream os;
  const auto& h = q.hyper();
  os << kQTableMagic << '\n'
     << "shape " << q.states() << ' ' << q.actions() << '\n'
     << "hyper " << format_double(h.learning_rate) << ' ' << format_double(h.discount) << ' '
     << format_double(h.epsilon_start) << ' ' << format_double(h.epsilon_end) << ' ' << h.epochs << '\n'
     << "bins " << q.edges.bins << ' ' << q.edges.dims() << '\n';
  for (const auto& dim : q.edges.per_dim) {
    os << "edges";
    for (double e : dim) os << ' ' << format_double(e);
    os << '\n';
  }
  for (std::size_t s = 0; s < q.states(); ++s) {
    for (int a = 0; a < q.actions(); ++a) {
      if (q.value(s, a) != 0.0 || q.visits(s, a) != 0) {
        os << "q " << s << ' ' << a << ' ' << format_double(q.value(s, a)) << ' ' << q.visits(s, a) << '\n';
      }
    }
  }
  return os.str();
}

namespace {

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  for (auto w : split(line, ' ')) {
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

template <typename T>
T parse_integral(std::string_view s) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

QTable parse_qtable(std::string_view text) {
  auto lines = split(text, '\n');
  std::size_t li = 0;
  auto next = [&]() -> std::vector<std::string_view> {
    while (li < lines.size() && lines[li].empty()) ++li;
    if (li >= lines.size()) throw std::invalid_argument("qtable file truncated");
    return fields(lines[li++]);
  };
  {
    while (li < lines.size() && lines[li].empty()) ++li;
    if (li >= lines.size() || lines[li++] != kQTableMagic) {
      throw std::invalid_argument("not a qtable file (bad header)");
    }
  }
  auto shape = next();
  if (shape.size() != 3 || shape[0] != "shape") throw std::invalid_argument("expected 'shape'");
  auto hyper = next();
  if (hyper.size() != 6 || hyper[0] != "hyper") throw std::invalid_argument("expected 'hyper'");
  QHyper h{parse_double(hyper[1]), parse_double(hyper[2]), parse_double(hyper[3]),
           parse_double(hyper[4]), parse_integral<int>(hyper[5])};
  QTable q(parse_integral<std::size_t>(shape[1]), parse_integral<int>(shape[2]), h);
  auto bins = next();
  if (bins.size() != 3 || bins[0] != "bins") throw std::invalid_argument("expected 'bins'");
  q.edges.bins = parse_integral<int>(bins[1]);
  const int dims = parse_integral<int>(bins[2]);
  for (int d = 0; d < dims; ++d) {
    auto e = next();
    if (e.empty() || e[0] != "edges" || static_cast<int>(e.size()) != q.edges.bins) {
      throw std::invalid_argument("bad 'edges' line");
    }
    std::vector<double> dim;
    for (std::size_t k = 1; k < e.size(); ++k) dim.push_back(parse_double(e[k]));
    q.edges.per_dim.push_back(std::move(dim));
  }
  if (q.edges.state_count() != q.states()) throw std::invalid_argument("bins^dims != state count");
  for (; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    auto f = fields(lines[li]);
    if (f.size() != 5 || f[0] != "q") throw std::invalid_argument("bad 'q' line");
    const auto s = parse_integral<std::size_t>(f[1]);
    const auto a = parse_integral<int>(f[2]);
    if (s >= q.states() || a < 0 || a >= q.actions()) throw std::invalid_argument("q entry out of range");
    q.set(s, a, parse_double(f[3]));
    q.set_visits(s, a, parse_integral<std::uint64_t>(f[4]));
  }
  return q;
}

// ---------------------------------------------------------------------------

double RewardWeights::of(SliceId s) const {
  switch (s) {
    case SliceId::embb: return embb;
    case SliceId::mtc: return mtc;
    case SliceId::urllc: return urllc;
  }
  return 0.0;
}

double reward(SliceId slice, const KpmRecord& kpm, const RewardWeights& w, const ScalingTable& scaling) {
  switch (slice) {
    case SliceId::embb:
      return w.embb * scaling.at(slice, Metric::throughput).apply(kpm.dl_throughput_mbps);
    case SliceId::mtc:
      return w.mtc *
             scaling.at(slice, Metric::tx_packets).apply(static_cast<double>(kpm.tx_packets));
    case SliceId::urllc:
      return w.urllc *
             (1.0 - scaling.at(slice, Metric::buffer_bytes).apply(static_cast<double>(kpm.buffer_bytes)));
  }
  return 0.0;
}

std::array<std::uint32_t, kNumSlices> reconcile_prbs(const std::array<int, kNumSlices>& deltas,
                                                     const std::array<std::uint32_t, kNumSlices>& quotas,
                                                     std::uint32_t total,
                                                     const std::array<double, kNumSlices>& backlog) {
  const std::int64_t floor = std::min<std::int64_t>(kPrbStep, total / kNumSlices);
  std::array<std::int64_t, kNumSlices> q{};
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < kNumSlices; ++i) {
    q[i] = std::max<std::int64_t>(floor, static_cast<std::int64_t>(quotas[i]) + deltas[i]);
    sum += q[i];
  }
  while (sum != static_cast<std::int64_t>(total)) {
    const std::int64_t diff = static_cast<std::int64_t>(total) - sum;
    const std::int64_t unit = std::min<std::int64_t>(kPrbStep, diff > 0 ? diff : -diff);
    std::size_t pick = kNumSlices;
    for (std::size_t i = 0; i < kNumSlices; ++i) {
      if (diff > 0) {
        if (pick == kNumSlices || backlog[i] > backlog[pick]) pick = i;
      } else {
        if (q[i] - unit < floor) continue;
        if (pick == kNumSlices || backlog[i] < backlog[pick]) pick = i;
      }
    }
    if (pick == kNumSlices) {
      // Every slice is at the floor: take single PRBs from the largest.
      pick = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
      q[pick] -= 1;
      sum -= 1;
      continue;
    }
    q[pick] += diff > 0 ? unit : -unit;
    sum += diff > 0 ? unit : -unit;
  }
  std::array<std::uint32_t, kNumSlices> out{};
  for (std::size_t i = 0; i < kNumSlices; ++i) out[i] = static_cast<std::uint32_t>(q[i]);
  return out;
}

// ---------------------------------------------------------------------------

std::size_t ModelBundle::encode_state(SliceId slice, const KpmWindow& raw) const {
  const auto& ranges = ae.scaling.ranges[index_of(slice)];
  auto scaled = scale(raw, std::span<const ScaleRange>(ranges.data(), ranges.size()));
  auto out = ae_forward(ae.model, scaled.flatten());
  return discretize(out.latent, tables[index_of(slice)].edges);
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << content;
}

}  // namespace

void save_bundle(const std::string& dir, const ModelBundle& b) {
  std::filesystem::create_directories(dir);
  write_file(std::filesystem::path(dir) / "autoencoder.model", format_model(b.ae));
  for (auto s : kAllSlices) {
    write_file(std::filesystem::path(dir) / ("qtable_" + std::string(to_string(s)) + ".q"),
               format_qtable(b.tables[index_of(s)]));
  }
}

ModelBundle load_bundle(const std::string& dir) {
  ModelBundle b;
  b.ae = parse_model(read_file(std::filesystem::path(dir) / "autoencoder.model"));
  for (auto s : kAllSlices) {
    b.tables[index_of(s)] = parse_qtable(
        read_file(std::filesystem::path(dir) / ("qtable_" + std::string(to_string(s)) + ".q")));
    if (b.tables[index_of(s)].edges.dims() != b.ae.model.latent_dim()) {
      throw std::invalid_argument("qtable bin edges do not match the latent size");
    }
  }
  return b;
}

// ---------------------------------------------------------------------------

std::vector<Transition> extract_transitions(std::span<const LoggedWindow> rows, SliceId slice,
                                            const ModelBundle& bundle, std::size_t reports_per_control,
                                            const RewardWeights& w) {
  std::vector<Transition> out;
  if (reports_per_control == 0) throw std::invalid_argument("reports_per_control must be positive");
  std::vector<KpmRecord> kpms;
  kpms.reserve(rows.size());
  for (const auto& r : rows) kpms.push_back(r.kpm);
  auto window_ending = [&](std::size_t i) {
    return extract_and_reshape(std::span<const KpmRecord>(kpms.data(), i + 1), bundle.T(), bundle.M());
  };
  const std::size_t R = reports_per_control;
  for (std::size_t i = R - 1; i + R < rows.size(); i += R) {
    Transition t;
    t.state = bundle.encode_state(slice, window_ending(i));
    t.next = bundle.encode_state(slice, window_ending(i + R));
    const auto before = static_cast<std::int64_t>(rows[i].kpm.prb_alloc);
    const auto after = static_cast<std::int64_t>(rows[i + 1].kpm.prb_alloc);
    const int delta = after > before ? kPrbStep : (after < before ? -kPrbStep : 0);
    t.action = action_id({delta, rows[i + 1].policy});
    t.reward = reward(slice, rows[i + R].kpm, w, bundle.ae.scaling);
    out.push_back(t);
  }
  return out;
}

QTable offline_train(std::span<const Transition> transitions, std::size_t states, const QHyper& hyper,
                     std::uint64_t seed) {
  QTable q(states, kNumActions, hyper);
  std::vector<std::size_t> order(transitions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const auto& t = transitions[i];
      q.update(t.state, t.action, t.reward, t.next);
    }
  }
  return q;
}

// ---------------------------------------------------------------------------

std::string_view to_string(AgentMode m) { return m == AgentMode::frozen ? "frozen" : "finetune"; }

std::optional<AgentMode> parse_agent_mode(std::string_view s) {
  if (s == "frozen") return AgentMode::frozen;
  if (s == "finetune") return AgentMode::finetune;
  return std::nullopt;
}

SliceAgents::SliceAgents(const ModelBundle& bundle, AgentMode mode, std::uint64_t seed,
                         RewardWeights weights)
    : bundle_(bundle),
      mode_(mode),
      epsilon_(mode == AgentMode::finetune ? bundle.tables[0].hyper().epsilon_end : 0.0),
      weights_(weights),
      rng_(seed),
      tables_(bundle.tables) {}

SliceDecision SliceAgents::slice_step(SliceId slice, const KpmWindow& window, const KpmRecord* latest) {
  auto& q = tables_[index_of(slice)];
  auto& prev = prev_[index_of(slice)];
  SliceDecision d;
  d.slice = slice;
  d.state = bundle_.encode_state(slice, window);
  d.reward = latest ? reward(slice, *latest, weights_, bundle_.ae.scaling) : 0.0;
  if (mode_ == AgentMode::finetune && prev) q.update(prev->first, prev->second, d.reward, d.state);
  d.action = select_action(q, d.state, epsilon_, rng_);
  prev = std::make_pair(d.state, d.action);
  return d;
}

std::optional<ControlDirective> SliceAgents::online_step(const XAppConnector& conn,
                                                         const std::string& bs_id,
                                                         std::uint32_t total_prbs) {
  std::array<const KpmRecord*, kNumSlices> latest{};
  for (auto s : kAllSlices) {
    latest[index_of(s)] = conn.latest(bs_id, s);
    if (!latest[index_of(s)]) return std::nullopt;
  }
  std::array<int, kNumSlices> deltas{};
  std::array<std::uint32_t, kNumSlices> quotas{};
  std::array<double, kNumSlices> backlog{};
  ControlDirective out;
  out.bs_id = bs_id;
  for (auto s : kAllSlices) {
    const auto i = index_of(s);
    auto decision = slice_step(s, conn.extract_and_reshape(bs_id, s, bundle_.T(), bundle_.M()), latest[i]);
    const auto action = action_from_id(decision.action);
    deltas[i] = action.prb_delta;
    quotas[i] = latest[i]->prb_alloc;
    backlog[i] = bundle_.ae.scaling.at(s, Metric::buffer_bytes).apply(static_cast<double>(latest[i]->buffer_bytes));
    out[s].policy = action.policy;
  }
  const auto feasible = reconcile_prbs(deltas, quotas, total_prbs, backlog);
  for (auto s : kAllSlices) {
    const auto i = index_of(s);
    out[s].prb_count = feasible[i];
    // Credit the action that takes effect, as offline replay does.
    const int realized = feasible[i] > quotas[i] ? kPrbStep : (feasible[i] < quotas[i] ? -kPrbStep : 0);
    prev_[i]->second = action_id({realized, out[s].policy});
  }
  return out;
}

}  // namespace oran
