#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oran/experiments.hpp"

using namespace oran;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("oran_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One 60 s, 7 BS campaign and the bundle trained on it, shared by the cases.
struct Trained {
  std::vector<std::vector<LoggedWindow>> data;
  TrainResult result;
  double train_seconds{0};
};

const Trained& trained() {
  static const Trained t = [] {
    Trained out;
    out.data = collect_datasets(SimConfig{}, 60.0, 1);
    const auto start = std::chrono::steady_clock::now();
    out.result = train_bundle(out.data, TrainOptions{}, 1);
    out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }();
  return t;
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 1, 0) == derive_seed(1, 1, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (std::uint64_t stream = 0; stream < 5; ++stream) {
      for (std::uint64_t i = 0; i < 8; ++i) seen.insert(derive_seed(seed, stream, i));
    }
  }
  CHECK(seen.size() == 200);
}

TEST_CASE("experiment spec validation") {
  ExperimentSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.seeds.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.seeds = {1};
  spec.duration_s = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.duration_s = 10;
  spec.modes.clear();
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("dataset CSV round trip and errors") {
  const std::vector<LoggedWindow> rows{
      {{250, "bs1", SliceId::embb, 3.95, 412, 12000, 24, 4.0}, Policy::PF},
      {{250, "bs1", SliceId::mtc, 0.089, 22, 0, 6, 0.089}, Policy::RR},
  };
  const auto text = format_dataset(rows);
  CHECK(text == std::string(kDatasetHeader) +
                    "\n250,bs1,embb,3.950,412,12000,24,4.000,PF\n250,bs1,mtc,0.089,22,0,6,0.089,RR\n");
  CHECK(parse_dataset(text) == rows);

  try {
    parse_dataset(std::string(kDatasetHeader) + "\n250,bs1,embb,3.950,412,12000,24,4.000,PF\n250,bs1,mtc,x,22,0,6,0.089,RR\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
  CHECK_THROWS_AS(parse_dataset("nonsense\n"), ParseError);
  CHECK_THROWS_AS(parse_dataset(std::string(kDatasetHeader) + "\n250,bs1,embb,3.950,412,12000,24,4.000,XX\n"),
                  ParseError);
  CHECK_THROWS_AS(read_dataset(scratch("missing.csv")), IoError);
}

TEST_CASE("collection: row counts and determinism") {
  SimConfig one;
  one.n_bs = 1;
  const auto a = collect_datasets(one, 60.0, 4);
  REQUIRE(a.size() == 1);
  CHECK(a[0].size() == 720);  // 240 windows x 3 slices
  CHECK(collect_datasets(one, 60.0, 4) == a);
  CHECK_FALSE(collect_datasets(one, 60.0, 5) == a);

  // Every window is a feasible split.
  for (std::size_t i = 0; i < a[0].size(); i += 3) {
    CHECK(a[0][i].kpm.prb_alloc + a[0][i + 1].kpm.prb_alloc + a[0][i + 2].kpm.prb_alloc == 50);
  }
  // The sweep actually explores.
  std::set<std::uint32_t> embb_quotas;
  std::set<Policy> policies;
  for (const auto& r : a[0]) {
    if (r.kpm.slice == SliceId::embb) embb_quotas.insert(r.kpm.prb_alloc);
    policies.insert(r.policy);
  }
  CHECK(embb_quotas.size() > 3);
  CHECK(policies.size() == 3);
}

TEST_CASE("run_collect writes one file per base station") {
  const auto dir = scratch("collect");
  ExperimentSpec spec;
  spec.duration_s = 5.0;
  spec.seeds = {2};
  spec.out_dir = dir;
  const auto files = run_collect(spec);
  REQUIRE(files.size() == 7);
  for (std::uint32_t i = 0; i < 7; ++i) {
    CHECK(files[i] == dir / ("bs" + std::to_string(i + 1) + ".csv"));
    CHECK(read_dataset(files[i]).size() == 60);
  }
  const auto first = slurp(files[0]);
  run_collect(spec);
  CHECK(slurp(files[0]) == first);
  fs::remove_all(dir);
}

TEST_CASE("training validates and finishes quickly") {
  const auto& t = trained();
  const auto& rep = t.result.report;
  CHECK(t.train_seconds < 120.0);
  CHECK(rep.ok());
  CHECK(rep.ae_mse < 0.5 * rep.data_variance);
  CHECK(rep.samples == 7u * 240u * 3u);
  for (auto n : rep.transitions) CHECK(n == 7u * 59u);
  const auto& b = t.result.bundle;
  CHECK(b.ae.model.sizes == std::vector<int>{16, 8, 3, 8, 16});
  for (const auto& q : b.tables) {
    CHECK(q.states() == 64);
    CHECK(q.edges.dims() == 3);
  }
  CHECK(rep.to_text().find("toy_mdp") != std::string::npos);
}

TEST_CASE("training is byte-reproducible") {
  const auto& t = trained();
  const auto again = train_bundle(t.data, TrainOptions{}, 1);
  const auto a = scratch("bundle_a"), b = scratch("bundle_b");
  save_bundle(a.string(), t.result.bundle);
  save_bundle(b.string(), again.bundle);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files >= 4);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("failed validation exports nothing") {
  const auto data_dir = scratch("train_data");
  fs::create_directories(data_dir);
  SimConfig one;
  one.n_bs = 1;
  const auto data = collect_datasets(one, 20.0, 1);
  write_dataset(data_dir / "bs1.csv", data[0]);
  const std::vector<fs::path> files{data_dir / "bs1.csv"};

  TrainOptions opt;
  opt.ae.epochs = 1;
  opt.max_relative_mse = 1e-12;
  const auto out = scratch("train_out");
  CHECK_THROWS_AS(run_train(files, opt, 1, out), ValidationFailed);
  CHECK(fs::exists(out / "validation.txt"));
  CHECK_FALSE(fs::exists(out / "autoencoder.model"));

  // Corrupt input names the bad row.
  std::ofstream(data_dir / "bad.csv") << kDatasetHeader << "\n1,bs1,embb,1.000,1,1,1\n";
  const std::vector<fs::path> bad{data_dir / "bad.csv"};
  try {
    run_train(bad, opt, 1, out);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
  }
  fs::remove_all(data_dir);
  fs::remove_all(out);
}

TEST_CASE("pearson and median") {
  const std::vector<std::pair<double, double>> anti{{1, 10}, {2, 8}, {3, 6}, {4, 4}};
  CHECK(*pearson(anti) == doctest::Approx(-1.0));
  const std::vector<std::pair<double, double>> flat{{1, 5}, {2, 5}, {3, 5}};
  CHECK_FALSE(pearson(flat));
  CHECK_FALSE(pearson(std::vector<std::pair<double, double>>{{1, 2}}));

  // Independent two-pass formula.
  const std::vector<std::pair<double, double>> xy{{1, 2}, {2, 1}, {3, 5}, {4, 3}, {5, 6}};
  double mx = 3, my = 3.4, sxy = 0, sxx = 0, syy = 0;
  for (auto [x, y] : xy) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  CHECK(*pearson(xy) == doctest::Approx(sxy / std::sqrt(sxx * syy)));

  CHECK(median({}) == 0.0);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
}

TEST_CASE("summaries from a hand-built KPM log") {
  ScalingTable sc;
  for (auto s : kAllSlices) {
    sc.at(s, Metric::throughput) = {0.0, 10.0};
    sc.at(s, Metric::tx_packets) = {0.0, 100.0};
    sc.at(s, Metric::buffer_bytes) = {0.0, 1000.0};
  }
  std::vector<KpmRecord> log;
  for (std::int64_t t = 250; t <= 1000; t += 250) {
    for (const std::string bs : {"bs1", "bs2"}) {
      log.push_back({t, bs, SliceId::embb, 5.0, 10, 100, 18, 5.0});
      log.push_back({t, bs, SliceId::mtc, 0.1, 50, 0, 16, 0.1});
      log.push_back({t, bs, SliceId::urllc, 0.2, 20, 500, 16, 0.2});
    }
  }
  const auto s = summarize(log, sc, 250);
  CHECK(s.windows == 8);
  // 0.5 + 0.5 + 0.5 per window.
  CHECK(s.aggregate_reward == doctest::Approx(1.5));
  CHECK(s.slices[0].mean_throughput == doctest::Approx(5.0));
  CHECK(s.slices[1].tx_packets_per_s == doctest::Approx(200.0));
  CHECK(s.slices[2].mean_buffer == doctest::Approx(500.0));
  CHECK(s.slices[2].mean_reward == doctest::Approx(0.5));
  CHECK(s.pairs[0].size() == 8);
  CHECK(summarize({}, sc, 250).aggregate_reward == 0.0);
}

TEST_CASE("frozen closed loop sanity") {
  const auto& bundle = trained().result.bundle;
  SimConfig cfg;
  cfg.n_bs = 2;
  const auto log = run_closed_loop(cfg, bundle, AgentMode::frozen, TrafficKind::slice_based, 20.0, 3);
  CHECK(log.kpm.size() == 2u * 80u * 3u);
  CHECK(log.controls.size() == 2u * 20u);
  for (const auto& c : log.controls) CHECK(c.directive.prb_sum() == 50);
  const auto& k = log.counters;
  CHECK(k.ric.dropped == 0);
  CHECK(k.ric.accepted == k.ric.delivered);
  CHECK(k.rejected_controls == 0);
  CHECK(k.prb_sum_violations == 0);
  CHECK(k.grant_violations == 0);
  CHECK(k.byte_violations == 0);
  CHECK(k.conservation_violations == 0);
  CHECK(k.controls_sent == log.controls.size());
  CHECK(k.acks_accepted == k.controls_sent);
  CHECK(k.max_loop_latency_ms <= static_cast<std::int64_t>(cfg.report_period_ms));

  // The KPM log reflects the last control applied to each BS.
  for (const auto& r : log.kpm) CHECK(r.prb_alloc >= 2);

  const auto again = run_closed_loop(cfg, bundle, AgentMode::frozen, TrafficKind::slice_based, 20.0, 3);
  CHECK(again.kpm == log.kpm);
  CHECK(format_counters(again.counters) == format_counters(log.counters));
  CHECK(format_counters(log.counters).find("ric_dropped=0\n") != std::string::npos);
}

TEST_CASE("eval writes logs and the summary recomputes identically") {
  const auto& bundle = trained().result.bundle;
  const auto dir = scratch("eval");
  ExperimentSpec spec;
  spec.sim.n_bs = 2;
  spec.duration_s = 10.0;
  spec.seeds = {1, 2};
  spec.out_dir = dir;
  const auto counters = run_eval(spec, bundle);
  CHECK(counters.size() == 2u * 2u * 2u);
  for (const auto& c : counters) CHECK(c.ric.dropped == 0);

  for (const auto* cell : {"frozen_slice_based", "finetune_uniform"}) {
    CHECK(fs::exists(dir / cell / "seed1" / "kpm.csv"));
    CHECK(fs::exists(dir / cell / "seed2" / "control.csv"));
    CHECK(fs::exists(dir / cell / "summary.csv"));
    CHECK(fs::exists(dir / cell / "correlation.csv"));
  }
  const auto table = slurp(dir / "comparison.txt");
  CHECK(table.find("frozen_slice_based") != std::string::npos);
  CHECK(table.find("finetune_uniform") != std::string::npos);

  const auto summary = slurp(dir / "frozen_slice_based" / "summary.csv");
  const auto cells = emit_summary(dir);
  CHECK(cells.size() == 4);
  CHECK(slurp(dir / "comparison.txt") == table);
  CHECK(slurp(dir / "frozen_slice_based" / "summary.csv") == summary);
  for (const auto& c : cells) CHECK(c.runs.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("cell names") {
  CHECK(cell_name(AgentMode::frozen, TrafficKind::slice_based) == "frozen_slice_based");
  CHECK(cell_name(AgentMode::finetune, TrafficKind::uniform) == "finetune_uniform");
}
