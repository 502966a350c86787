#include "gcdl/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

namespace gcdl {

std::vector<InitSample> synth_init_dataset(int n_samples, std::uint64_t seed,
                                           double gamma) {
  if (n_samples <= 0) {
    throw std::invalid_argument("synth_init_dataset: n_samples must be > 0");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi,
                                               std::numbers::pi);
  std::uniform_real_distribution<double> coord(-4.0, 4.0);
  std::uniform_real_distribution<double> goal_dist(0.0, 10.0);
  std::uniform_real_distribution<double> radius(0.2, 0.8);
  std::uniform_real_distribution<double> vpref(0.5, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> far(3.0, 10.0);

  std::vector<InitSample> out;
  out.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    GlobalAgentState s;
    s.pos = Vec2(coord(rng), coord(rng));
    s.heading = angle(rng);
    s.radius = radius(rng);
    s.v_pref = vpref(rng);
    s.vel = s.v_pref * Vec2(std::cos(s.heading), std::sin(s.heading));
    const double dg = goal_dist(rng);
    const double goal_dir = angle(rng);
    s.goal = s.pos + dg * Vec2(std::cos(goal_dir), std::sin(goal_dir));

    // Sparse scenes: occasionally a distant bystander or two.
    std::vector<GlobalAgentState> others;
    if (unit(rng) < 0.5) {
      const int n_others = unit(rng) < 0.5 ? 1 : 2;
      for (int j = 0; j < n_others; ++j) {
        GlobalAgentState o;
        const double dir = angle(rng);
        o.pos = s.pos + far(rng) * Vec2(std::cos(dir), std::sin(dir));
        o.heading = angle(rng);
        o.v_pref = vpref(rng);
        o.vel = o.v_pref * Vec2(std::cos(o.heading), std::sin(o.heading));
        o.radius = radius(rng);
        others.push_back(o);
      }
    }

    InitSample sample;
    auto [ego, neighbors] = to_ego_frame(s, others);
    sample.self = ego;
    sample.neighbors = order_neighbors(OrderingStrategy::ClosestLast,
                                       rotate(s.vel, -ego_frame_angle(s)),
                                       neighbors);
    sample.expert_action = non_cooperative(s, build_action_space(s.v_pref));
    sample.value_label = std::pow(gamma, dg);
    out.push_back(std::move(sample));
  }
  return out;
}

SupervisedResult supervised_init(NetworkParams& net,
                                 std::span<const InitSample> dataset,
                                 const SupervisedConfig& cfg) {
  if (dataset.empty()) {
    throw std::invalid_argument("supervised_init: empty dataset");
  }
  std::mt19937_64 rng(cfg.shuffle_seed);
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  AdamState adam = AdamState::create(net);
  SupervisedResult result;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + cfg.batch_size);
      std::vector<SupervisedSample> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const InitSample& s = dataset[order[k]];
        batch.push_back({s.self, s.neighbors, s.expert_action, s.value_label});
      }
      double loss = 0.0;
      GradientSet grads = supervised_backward(net, batch, &loss);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("supervised_init: loss diverged");
      }
      grads.scale(1.0 / static_cast<double>(batch.size()));
      adam_step(net, grads, adam, cfg.learning_rate);
      epoch_loss += loss;
    }
    result.epoch_losses.push_back(epoch_loss /
                                  static_cast<double>(dataset.size()));
  }
  return result;
}

std::vector<double> compute_returns(std::span<const double> rewards,
                                    double bootstrap, double gamma) {
  std::vector<double> returns(rewards.size());
  double acc = bootstrap;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards[t] + gamma * acc;
    returns[t] = acc;
  }
  return returns;
}

void RollingReward::add(double episode_reward) {
  values.push_back(episode_reward);
  sum += episode_reward;
  while (static_cast<int>(values.size()) > window) {
    sum -= values.front();
    values.pop_front();
  }
}

double RollingReward::mean() const {
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

EnvWorker::EnvWorker(std::uint64_t seed, const TrainerConfig& cfg)
    : rng_(seed), cfg_(cfg) {}

EpisodeYield EnvWorker::run_episode(const NetworkParams& snapshot,
                                    std::int64_t episode_id, int min_agents,
                                    int max_agents) {
  std::uniform_int_distribution<int> n_dist(min_agents, max_agents);
  const int n = n_dist(rng_);

  ScenarioSpec spec;
  while (true) {
    try {
      spec = random_training_case(n, rng_());
      break;
    } catch (const std::runtime_error&) {
      // crowded draw, retry with a fresh seed
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (AgentSpec& a : spec.agents) {
    const double u = unit(rng_);
    if (u < cfg_.mix.p_ga3c) {
      a.policy = PolicyTag::GA3C_CADRL;
    } else if (u < cfg_.mix.p_ga3c + cfg_.mix.p_noncoop) {
      a.policy = PolicyTag::NonCooperative;
    } else {
      a.policy = PolicyTag::ZeroVelocity;
    }
  }

  RolloutConfig rollout;
  rollout.sim = cfg_.sim;
  rollout.ordering = cfg_.ordering;
  rollout.sample_actions = true;
  rollout.sample_seed = rng_();

  EpisodeYield yield;
  std::vector<AgentTrajectory> traj(spec.agents.size());
  std::vector<double> reward_sum(spec.agents.size(), 0.0);
  for (auto& t : traj) t.episode = episode_id;

  gcdl::run_episode(spec, &snapshot, rollout,
              [&](int agent, int step, const EgoSelfState& self,
                  const std::vector<EgoNeighborState>& neighbors,
                  int action_idx, double reward, bool terminal) {
                if (spec.agents[agent].policy != PolicyTag::GA3C_CADRL) return;
                traj[agent].steps.push_back({self, neighbors, action_idx,
                                             reward, episode_id, step,
                                             terminal});
                reward_sum[agent] += reward;
              });

  double total = 0.0;
  int learners = 0;
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    if (spec.agents[i].policy != PolicyTag::GA3C_CADRL) continue;
    ++learners;
    total += reward_sum[i];
    if (!traj[i].steps.empty()) {
      yield.trajectories.push_back(std::move(traj[i]));
    }
  }
  if (learners > 0) yield.mean_learner_reward = total / learners;
  return yield;
}

namespace {

nlohmann::json config_json(const TrainerConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate},
          {"beta", cfg.beta},
          {"gamma", cfg.gamma},
          {"value_weight", cfg.value_weight},
          {"batch_size", cfg.batch_size},
          {"nstep", cfg.nstep},
          {"phase1_episodes", cfg.phase1_episodes},
          {"phase2_episodes", cfg.phase2_episodes},
          {"phase1_agents", {cfg.phase1_min_agents, cfg.phase1_max_agents}},
          {"phase2_agents", {cfg.phase2_min_agents, cfg.phase2_max_agents}},
          {"workers", cfg.workers},
          {"seed", cfg.seed},
          {"rolling_window", cfg.rolling_window},
          {"policy_mix",
           {{"ga3c", cfg.mix.p_ga3c},
            {"noncoop", cfg.mix.p_noncoop},
            {"zero", cfg.mix.p_zero}}},
          {"dt", cfg.sim.dt},
          {"timeout", cfg.sim.timeout},
          {"ordering", to_string(cfg.ordering)}};
}

void write_reward_curve(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::int64_t, double>>& curve) {
  std::ofstream out(path);
  out << "episode,rolling_reward\n";
  char buf[64];
  for (const auto& [ep, r] : curve) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g\n",
                  static_cast<long long>(ep), r);
    out << buf;
  }
}

}  // namespace

TrainResult trainer_loop(NetworkParams net, const TrainerConfig& cfg) {
  if (cfg.workers < 1) throw std::invalid_argument("trainer_loop: workers < 1");

  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    std::ofstream cfg_out(*cfg.out_dir / "config.json");
    cfg_out << config_json(cfg).dump(2) << "\n";
  }

  std::mt19937_64 seeder(cfg.seed);
  std::vector<EnvWorker> workers;
  workers.reserve(cfg.workers);
  for (int w = 0; w < cfg.workers; ++w) workers.emplace_back(seeder(), cfg);

  AdamState adam = AdamState::create(net);
  A3cConfig loss_cfg{cfg.beta, cfg.value_weight};
  RollingReward rolling(cfg.rolling_window);
  TrainResult result;

  std::vector<Sample> pending;
  const std::int64_t total_episodes = cfg.phase1_episodes + cfg.phase2_episodes;

  for (std::int64_t ep = 0; ep < total_episodes; ++ep) {
    const bool phase1 = ep < cfg.phase1_episodes;
    const int min_agents =
        phase1 ? cfg.phase1_min_agents : cfg.phase2_min_agents;
    const int max_agents =
        phase1 ? cfg.phase1_max_agents : cfg.phase2_max_agents;

    // Round-robin scheduling keeps same-seed runs reproducible; each worker
    // adopts the freshest parameters at episode start.
    EnvWorker& worker = workers[ep % cfg.workers];
    const EpisodeYield yield = worker.run_episode(net, ep, min_agents,
                                                  max_agents);
    if (yield.mean_learner_reward) {
      rolling.add(*yield.mean_learner_reward);
      result.reward_curve.emplace_back(ep, rolling.mean());
    }

    for (const AgentTrajectory& traj : yield.trajectories) {
      const int len = static_cast<int>(traj.steps.size());
      for (int t0 = 0; t0 < len; t0 += cfg.nstep) {
        const int t1 = std::min(len, t0 + cfg.nstep);
        std::vector<double> rewards;
        rewards.reserve(t1 - t0);
        for (int t = t0; t < t1; ++t) rewards.push_back(traj.steps[t].reward);

        double bootstrap = 0.0;
        if (t1 < len) {
          const Experience& next = traj.steps[t1];
          bootstrap = network_forward(net, next.self, next.neighbors).value;
        }
        const std::vector<double> returns =
            compute_returns(rewards, bootstrap, cfg.gamma);
        for (int t = t0; t < t1; ++t) {
          pending.push_back({traj.steps[t].self, traj.steps[t].neighbors,
                             traj.steps[t].action, returns[t - t0]});
        }
      }
    }

    while (static_cast<int>(pending.size()) >= cfg.batch_size) {
      std::span<const Sample> batch(pending.data(), cfg.batch_size);
      LossBreakdown loss;
      GradientSet grads = backward(net, batch, loss_cfg, &loss);
      if (!std::isfinite(loss.total) || !grads.finite()) {
        if (cfg.out_dir) {
          save_checkpoint(net, *cfg.out_dir / "diverged.ckpt");
          write_reward_curve(*cfg.out_dir / "rolling_reward.csv",
                             result.reward_curve);
        }
        throw std::runtime_error("trainer_loop: non-finite loss");
      }
      // Gradients accumulate (sum) over the batch, A3C style; the learning
      // rate is calibrated for summed batch gradients.
      adam_step(net, grads, adam, cfg.learning_rate);
      pending.erase(pending.begin(), pending.begin() + cfg.batch_size);
    }

    if (cfg.out_dir && cfg.checkpoint_every > 0 &&
        (ep + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(net, *cfg.out_dir /
                               ("checkpoint_" + std::to_string(ep + 1) +
                                ".ckpt"));
    }
  }

  if (cfg.out_dir) {
    save_checkpoint(net, *cfg.out_dir / "final.ckpt");
    write_reward_curve(*cfg.out_dir / "rolling_reward.csv",
                       result.reward_curve);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace gcdl
