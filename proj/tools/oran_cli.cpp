// oran: experiment driver and free-running demo processes.
//
//   oran collect --config scenario.conf --seed 1 --duration 600 --out data/
//   oran train   --data data/ --seed 1 --out bundle/
//   oran eval    --config scenario.conf --bundle bundle/ --seed 1 --seed 2 --out runs/
//   oran report  --out runs/
//   oran ric | bs | xapp   (socket mode, real time)
//
// ORAN_LOG_LEVEL selects verbosity (trace, debug, info, warn, error, off).

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "oran/experiments.hpp"
#include "oran/transport.hpp"

namespace fs = std::filesystem;
using namespace oran;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void setup_logging() {
  const char* env = std::getenv("ORAN_LOG_LEVEL");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
}

SimConfig load_config(const std::string& path) {
  if (path.empty()) return SimConfig{};
  return load_sim_config(path);
}

std::vector<fs::path> dataset_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

std::vector<AgentMode> modes_from(const std::string& s) {
  if (s.empty() || s == "both") return {AgentMode::frozen, AgentMode::finetune};
  auto m = parse_agent_mode(s);
  if (!m) throw CLI::ValidationError("--mode", "expected frozen, finetune or both");
  return {*m};
}

std::vector<TrafficKind> traffic_from(const std::string& s) {
  if (s.empty() || s == "both") return {TrafficKind::slice_based, TrafficKind::uniform};
  auto t = parse_traffic_kind(s);
  if (!t) throw CLI::ValidationError("--traffic", "expected slice, uniform or both");
  return {*t};
}

void install_signals() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

int run_ric(const SimConfig& cfg) {
  TcpRicServer server(cfg.ric_host, cfg.ric_port);
  server.start();
  spdlog::info("ric listening on {}:{}", cfg.ric_host, server.port());
  install_signals();
  auto last = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (std::chrono::steady_clock::now() - last > std::chrono::seconds(10)) {
      last = std::chrono::steady_clock::now();
      spdlog::debug("ric stats\n{}", server.ric().stats_dump());
    }
  }
  server.stop();
  std::cout << server.ric().stats_dump();
  return 0;
}

int run_bs(const SimConfig& cfg, std::uint32_t index, std::uint64_t seed, double duration_s) {
  TcpClient client;
  client.connect(cfg.ric_host, cfg.ric_port);
  E2NodeAgent node(BaseStation(cfg.bs_name(index), cfg, derive_seed(seed, 1, index)),
                   [&client](E2Frame f) { client.send(f); });
  node.start();
  install_signals();
  const auto start = std::chrono::steady_clock::now();
  const auto step = std::chrono::milliseconds(cfg.tti_ms * 10);
  auto next = start;
  while (!g_stop) {
    if (duration_s > 0 &&
        std::chrono::steady_clock::now() - start > std::chrono::duration<double>(duration_s)) {
      break;
    }
    next += step;
    while (std::chrono::steady_clock::now() < next) {
      auto f = client.receive(1);
      if (f) node.handle(*f);
    }
    node.advance_ms(static_cast<std::int64_t>(cfg.tti_ms) * 10);
  }
  spdlog::info("{} sent {} indications, {} rejected controls", node.bs().id(), node.indications_sent(),
               node.bs().rejected_controls());
  client.close();
  return 0;
}

int run_xapp(const SimConfig& cfg, const std::string& bundle_dir, AgentMode mode, std::uint32_t index,
             std::uint64_t seed, double duration_s) {
  const auto bundle = load_bundle(bundle_dir);
  TcpClient client;
  client.connect(cfg.ric_host, cfg.ric_port);
  XAppConnector conn("xapp" + std::to_string(index + 1), [&client](E2Frame f) { client.send(f); },
                     bundle.T());
  SliceAgents agents(bundle, mode, derive_seed(seed, 2, index));
  std::uint64_t seen = 0;
  conn.on_indication([&](const std::string& bs_id) {
    if (++seen % (cfg.control_period_ms / cfg.report_period_ms) != 0) return;
    if (auto d = agents.online_step(conn, bs_id, cfg.total_prbs)) {
      spdlog::debug("control {}", serialize_control_payload(*d));
      conn.send_control(*d);
    }
  });
  conn.connect_and_subscribe({cfg.bs_name(index)}, cfg.report_period_ms);
  install_signals();
  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    if (duration_s > 0 &&
        std::chrono::steady_clock::now() - start > std::chrono::duration<double>(duration_s)) {
      break;
    }
    if (auto f = client.receive(100)) conn.handle(*f);
  }
  spdlog::info("{} got {} indications, sent {} controls", conn.id(), conn.indications(),
               conn.controls_sent());
  client.close();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"O-RAN slicing xApp experiments"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string mode = "both";
  std::string traffic;
  double duration = 120.0;
  std::string out = "out";
  std::vector<std::string> data;
  std::string bundle_dir;
  std::uint32_t index = 0;
  std::size_t reports_per_control = 0;
  double wall_s = 0.0;
  TrainOptions train_opt;

  auto common = [&](CLI::App* sub, bool multi_seed) {
    sub->add_option("--config", config, "Scenario file (key = value lines)");
    if (multi_seed) {
      sub->add_option("--seed", seeds, "Seed; repeat for several")->expected(1, -1);
    } else {
      sub->add_option("--seed", seeds, "Seed")->expected(1);
    }
  };

  auto* collect = app.add_subcommand("collect", "Randomized control sweep; one dataset per BS");
  common(collect, false);
  collect->add_option("--duration", duration, "Simulated seconds")->check(CLI::PositiveNumber);
  collect->add_option("--traffic", traffic, "slice or uniform")->default_str("slice");
  collect->add_option("--out", out, "Output directory");

  auto* train = app.add_subcommand("train", "Offline autoencoder and Q-table training");
  common(train, false);
  train->add_option("--data", data, "Dataset files or directories")->required()->expected(1, -1);
  train->add_option("--out", out, "Bundle directory");
  train->add_option("--ae-epochs", train_opt.ae.epochs, "Autoencoder epochs");
  train->add_option("--ae-lr", train_opt.ae.learning_rate, "Autoencoder learning rate");
  train->add_option("--q-epochs", train_opt.q.epochs, "Offline replay passes");
  train->add_option("--q-lr", train_opt.q.learning_rate, "Q-learning rate");
  train->add_option("--bins", train_opt.latent_bins, "Quantile bins per latent dimension");

  auto* eval = app.add_subcommand("eval", "Closed-loop lockstep evaluation matrix");
  common(eval, true);
  eval->add_option("--bundle", bundle_dir, "Trained bundle directory")->required();
  eval->add_option("--mode", mode, "frozen, finetune or both");
  eval->add_option("--traffic", traffic, "slice, uniform or both");
  eval->add_option("--duration", duration, "Simulated seconds per run")->check(CLI::PositiveNumber);
  eval->add_option("--out", out, "Run directory");

  auto* report = app.add_subcommand("report", "Recompute summaries from an eval run directory");
  report->add_option("--out", out, "Run directory");

  auto* ric = app.add_subcommand("ric", "RIC server (socket mode)");
  ric->add_option("--config", config, "Scenario file");

  auto* bs = app.add_subcommand("bs", "Simulated base station in real time (socket mode)");
  common(bs, false);
  bs->add_option("--index", index, "Base station index (0-based)");
  bs->add_option("--duration", wall_s, "Wall-clock seconds, 0 = until interrupted");

  auto* xapp = app.add_subcommand("xapp", "Slicing xApp (socket mode)");
  common(xapp, false);
  xapp->add_option("--bundle", bundle_dir, "Trained bundle directory")->required();
  xapp->add_option("--mode", mode, "frozen or finetune");
  xapp->add_option("--index", index, "Base station index to subscribe to");
  xapp->add_option("--duration", wall_s, "Wall-clock seconds, 0 = until interrupted");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::uint64_t seed = seeds.empty() ? 1 : seeds.front();
    if (*collect) {
      ExperimentSpec spec;
      spec.sim = load_config(config);
      spec.traffic = {traffic.empty() ? TrafficKind::slice_based : traffic_from(traffic).front()};
      spec.duration_s = duration;
      spec.seeds = {seed};
      spec.out_dir = out;
      spec.reports_per_control = spec.sim.control_period_ms / spec.sim.report_period_ms;
      auto files = run_collect(spec);
      spdlog::info("wrote {} datasets under {}", files.size(), out);
      return 0;
    }
    if (*train) {
      auto files = dataset_files(data);
      if (files.empty()) {
        spdlog::error("no dataset files found");
        return 2;
      }
      if (!config.empty()) {
        const auto sim = load_config(config);
        train_opt.reports_per_control = sim.control_period_ms / sim.report_period_ms;
      }
      auto result = run_train(files, train_opt, seed, out);
      std::cout << result.report.to_text();
      spdlog::info("bundle written to {}", out);
      return 0;
    }
    if (*eval) {
      ExperimentSpec spec;
      spec.sim = load_config(config);
      spec.modes = modes_from(mode);
      spec.traffic = traffic_from(traffic);
      spec.duration_s = duration;
      spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{1} : seeds;
      spec.out_dir = out;
      spec.reports_per_control =
          reports_per_control ? reports_per_control : spec.sim.control_period_ms / spec.sim.report_period_ms;
      const auto bundle = load_bundle(bundle_dir);
      auto counters = run_eval(spec, bundle);
      std::uint64_t drops = 0;
      for (const auto& c : counters) drops += c.ric.dropped;
      spdlog::info("{} runs, {} routed-frame drops", counters.size(), drops);
      std::ifstream table(fs::path(out) / "comparison.txt");
      std::cout << table.rdbuf();
      return drops == 0 ? 0 : 3;
    }
    if (*report) {
      emit_summary(out);
      std::ifstream table(fs::path(out) / "comparison.txt");
      std::cout << table.rdbuf();
      return 0;
    }
    if (*ric) return run_ric(load_config(config));
    if (*bs) return run_bs(load_config(config), index, seed, wall_s);
    if (*xapp) {
      auto m = parse_agent_mode(mode);
      return run_xapp(load_config(config), bundle_dir, m ? *m : AgentMode::frozen, index, seed, wall_s);
    }
  } catch (const ValidationFailed& e) {
    spdlog::error("{}", e.what());
    return 4;
  } catch (const ParseError& e) {
    spdlog::error("parse error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
