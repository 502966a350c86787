// Command-line front end: training, evaluation, gate analysis, ordering
// comparison, scenario demos, and formation runs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gcdl/analysis.hpp"
#include "gcdl/harness.hpp"
#include "gcdl/training.hpp"

namespace fs = std::filesystem;
using namespace gcdl;

namespace {

std::unique_ptr<NetworkParams> maybe_load(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_unique<NetworkParams>(load_checkpoint(path));
}

int cmd_train(const std::string& out_dir, std::int64_t phase1,
              std::int64_t phase2, int workers, std::uint64_t seed,
              int init_samples, int init_epochs) {
  fs::create_directories(out_dir);
  NetworkParams net = init_network(seed);
  const auto dataset = synth_init_dataset(init_samples, seed + 1);
  SupervisedConfig sup;
  sup.epochs = init_epochs;
  sup.shuffle_seed = seed + 2;
  supervised_init(net, dataset, sup);
  save_checkpoint(net, fs::path(out_dir) / "init.ckpt");

  TrainerConfig cfg;
  cfg.phase1_episodes = phase1;
  cfg.phase2_episodes = phase2;
  cfg.workers = workers;
  cfg.seed = seed;
  cfg.out_dir = fs::path(out_dir);
  trainer_loop(std::move(net), cfg);
  return 0;
}

int cmd_evaluate(const std::string& policy, int n_agents, int cases,
                 const std::string& checkpoint, std::uint64_t seed,
                 const std::string& report_path) {
  const PolicyTag tag = policy_tag_from_string(policy);
  const auto net = maybe_load(checkpoint);
  RolloutConfig cfg;
  const EvalReport report =
      evaluate(tag, n_agents, cases, cfg, seed, net.get());
  const std::string json = report_json(report);
  if (report_path.empty()) {
    std::cout << json;
  } else {
    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("cannot write report: " + report_path);
    out << json;
  }
  return 0;
}

int cmd_analyze_gates(const std::string& checkpoint, int scenes,
                      const std::string& ordering, const std::string& out) {
  const NetworkParams net = load_checkpoint(checkpoint);
  const auto rows = gate_trace_experiment(net, scenes, 0,
                                          ordering_from_string(ordering));
  std::ofstream file(out);
  if (!file) throw std::runtime_error("cannot write gate trace: " + out);
  file << gate_trace_csv(rows);
  return 0;
}

int cmd_ordering_experiment(std::int64_t episodes, const std::string& out_dir,
                            std::uint64_t seed, int init_samples,
                            int init_epochs) {
  NetworkParams net = init_network(seed);
  const auto dataset = synth_init_dataset(init_samples, seed + 1);
  SupervisedConfig sup;
  sup.epochs = init_epochs;
  sup.shuffle_seed = seed + 2;
  supervised_init(net, dataset, sup);

  TrainerConfig cfg;
  cfg.phase1_episodes = episodes;
  cfg.phase2_episodes = 0;
  cfg.seed = seed;
  ordering_experiment(net, cfg, fs::path(out_dir));
  return 0;
}

int cmd_demo(const std::string& scenario_file, const std::string& checkpoint,
             const std::string& trajectory_out) {
  const ScenarioSpec spec = load_scenario(scenario_file);
  const auto net = maybe_load(checkpoint);
  RolloutConfig cfg;
  const EpisodeLog log = run_episode(spec, net.get(), cfg);
  if (trajectory_out.empty()) {
    std::cout << trajectory_csv(log);
  } else {
    save_trajectory(log, trajectory_out);
  }
  return 0;
}

int cmd_formation(const std::string& goals_file, const std::string& checkpoint,
                  const std::string& out_dir, const std::string& policy,
                  std::uint64_t seed) {
  const FormationTask task = load_formation_task(goals_file);
  const auto net = maybe_load(checkpoint);
  const PolicyTag tag = policy_tag_from_string(policy);
  FormationConfig cfg;
  const auto logs = run_formation(task, tag, cfg, seed, net.get());
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    save_trajectory(logs[i],
                    fs::path(out_dir) / ("formation_" + std::to_string(i) +
                                         ".csv"));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized multiagent collision avoidance lab"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "supervised init + RL training");
  std::int64_t phase1 = 0, phase2 = 0;
  int workers = 1, init_samples = 10000, init_epochs = 20;
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  train->add_option("--phase1-episodes", phase1);
  train->add_option("--phase2-episodes", phase2);
  train->add_option("--workers", workers);
  train->add_option("--seed", seed);
  train->add_option("--out-dir", out_dir);
  train->add_option("--init-samples", init_samples);
  train->add_option("--init-epochs", init_epochs);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "batch metrics on random cases");
  std::string policy = "noncoop", checkpoint, report_path;
  int n_agents = 2, cases = 500;
  eval->add_option("--policy", policy);
  eval->add_option("--n-agents", n_agents);
  eval->add_option("--cases", cases);
  eval->add_option("--checkpoint", checkpoint);
  eval->add_option("--seed", seed);
  eval->add_option("--report", report_path);

  // analyze-gates
  auto* gates = app.add_subcommand("analyze-gates", "input-gate decomposition");
  std::string ordering = "closest_last", gates_out = "gates.csv";
  int scenes = 100;
  gates->add_option("--checkpoint", checkpoint)->required();
  gates->add_option("--scenes", scenes);
  gates->add_option("--ordering", ordering);
  gates->add_option("--out", gates_out);

  // ordering-experiment
  auto* order = app.add_subcommand("ordering-experiment",
                                   "train one policy per ordering strategy");
  std::int64_t episodes = 0;
  order->add_option("--episodes", episodes);
  order->add_option("--out-dir", out_dir);
  order->add_option("--seed", seed);
  order->add_option("--init-samples", init_samples);
  order->add_option("--init-epochs", init_epochs);

  // demo
  auto* demo = app.add_subcommand("demo", "run one scenario file");
  std::string scenario_file, trajectory_out;
  demo->add_option("--scenario-file", scenario_file)->required();
  demo->add_option("--checkpoint", checkpoint);
  demo->add_option("--trajectory-out", trajectory_out);

  // formation
  auto* formation = app.add_subcommand("formation", "sequential goal sets");
  std::string goals_file, formation_policy = "ga3c";
  formation->add_option("--goals-file", goals_file)->required();
  formation->add_option("--checkpoint", checkpoint);
  formation->add_option("--out", out_dir);
  formation->add_option("--policy", formation_policy);
  formation->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) {
      return cmd_train(out_dir, phase1, phase2, workers, seed, init_samples,
                       init_epochs);
    }
    if (eval->parsed()) {
      return cmd_evaluate(policy, n_agents, cases, checkpoint, seed,
                          report_path);
    }
    if (gates->parsed()) {
      return cmd_analyze_gates(checkpoint, scenes, ordering, gates_out);
    }
    if (order->parsed()) {
      return cmd_ordering_experiment(episodes, out_dir, seed, init_samples,
                                     init_epochs);
    }
    if (demo->parsed()) {
      return cmd_demo(scenario_file, checkpoint, trajectory_out);
    }
    if (formation->parsed()) {
      return cmd_formation(goals_file, checkpoint, out_dir, formation_policy,
                           seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
