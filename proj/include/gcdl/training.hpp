#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gcdl/network.hpp"
#include "gcdl/rollout.hpp"

namespace gcdl {

struct Experience {
  EgoSelfState self;
  std::vector<EgoNeighborState> neighbors;  // ordered as fed to the network
  int action = 0;
  double reward = 0.0;
  std::int64_t episode = 0;
  int step = 0;
  bool terminal = false;
};

/// One learning agent's experience stream for one episode.
struct AgentTrajectory {
  std::int64_t episode = 0;
  std::vector<Experience> steps;
};

struct EpisodeYield {
  std::vector<AgentTrajectory> trajectories;
  // Mean over GA3C agents of their summed episode reward; empty when the
  // episode had no learning agents.
  std::optional<double> mean_learner_reward;
};

struct InitSample {
  EgoSelfState self;
  std::vector<EgoNeighborState> neighbors;
  int expert_action = 0;
  double value_label = 0.0;
};

/// Synthetic initialization set: random sparse states labeled with the
/// straight-to-goal expert action and the closed-form value gamma^{d_g}.
std::vector<InitSample> synth_init_dataset(int n_samples, std::uint64_t seed,
                                           double gamma = 0.97);

struct SupervisedConfig {
  int epochs = 20;
  int batch_size = 100;
  double learning_rate = 1e-3;
  std::uint64_t shuffle_seed = 0;
};

struct SupervisedResult {
  std::vector<double> epoch_losses;  // mean per-sample loss per epoch
};

SupervisedResult supervised_init(NetworkParams& net,
                                 std::span<const InitSample> dataset,
                                 const SupervisedConfig& cfg);

/// n-step discounted returns over one bootstrap segment:
/// R_t = r_t + gamma * R_{t+1}, seeded with the bootstrap value past the end.
std::vector<double> compute_returns(std::span<const double> rewards,
                                    double bootstrap, double gamma);

struct PolicyMix {
  double p_ga3c = 0.8;
  double p_noncoop = 0.1;
  double p_zero = 0.1;
};

struct TrainerConfig {
  double learning_rate = 2e-5;
  double beta = 1e-4;
  double gamma = 0.97;
  double value_weight = 0.5;
  int batch_size = 100;
  int nstep = 5;
  std::int64_t phase1_episodes = 0;
  std::int64_t phase2_episodes = 0;
  int phase1_min_agents = 2, phase1_max_agents = 4;
  int phase2_min_agents = 2, phase2_max_agents = 10;
  int workers = 1;
  std::uint64_t seed = 0;
  int rolling_window = 200;
  PolicyMix mix;
  SimConfig sim;
  OrderingStrategy ordering = OrderingStrategy::ClosestLast;
  // When set, checkpoints and the reward curve are written here.
  std::optional<std::filesystem::path> out_dir;
  std::int64_t checkpoint_every = 0;  // episodes; 0 disables periodic saves
};

/// Generates one episode with a random agent count in [min,max], a random
/// per-agent policy assortment, and sampled (stochastic) learner actions.
/// Deterministic given the worker RNG state and the snapshot.
class EnvWorker {
 public:
  EnvWorker(std::uint64_t seed, const TrainerConfig& cfg);

  EpisodeYield run_episode(const NetworkParams& snapshot,
                           std::int64_t episode_id, int min_agents,
                           int max_agents);

 private:
  std::mt19937_64 rng_;
  const TrainerConfig& cfg_;
};

/// Bounded MPSC queue used when training with detached worker threads.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

struct RollingReward {
  explicit RollingReward(int window) : window(window) {}
  void add(double episode_reward);
  double mean() const;

  int window;
  std::deque<double> values;
  double sum = 0.0;
};

struct TrainResult {
  NetworkParams net;
  // (episode index, rolling reward) sampled at every episode that had
  // learning agents.
  std::vector<std::pair<std::int64_t, double>> reward_curve;
};

/// Two-phase curriculum driver. Workers are scheduled round-robin on the
/// calling thread so same-seed runs are bit-reproducible; the optimizer state
/// persists across the phase switch.
TrainResult trainer_loop(NetworkParams net, const TrainerConfig& cfg);

}  // namespace gcdl
