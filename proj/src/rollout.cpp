#include "gcdl/rollout.hpp"

#include <random>
#include <stdexcept>

namespace gcdl {

namespace {

int sample_index(const VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  double cum = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    cum += probs(i);
    if (u < cum) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

EpisodeLog run_episode(const ScenarioSpec& spec, const NetworkParams* net,
                       const RolloutConfig& cfg, const StepObserver& observer) {
  const int n = static_cast<int>(spec.agents.size());
  std::vector<GlobalAgentState> states = initial_states(spec);
  std::vector<ActionSpace> spaces;
  spaces.reserve(n);
  for (const AgentSpec& a : spec.agents) {
    spaces.push_back(build_action_space(a.v_pref));
    if (needs_network(a.policy) && net == nullptr) {
      throw std::runtime_error("run_episode: learned policy requires a network");
    }
  }

  std::mt19937_64 rng(cfg.sample_seed);
  EpisodeLog log;
  log.final_status.assign(n, AgentStatus::Active);
  log.time_to_goal.assign(n, 0.0);

  const int steps = max_steps(cfg.sim);
  for (int step = 1; step <= steps; ++step) {
    const double t_after = step * cfg.sim.dt;

    std::vector<int> active;
    for (int i = 0; i < n; ++i) {
      if (states[i].status == AgentStatus::Active) active.push_back(i);
    }
    if (active.empty()) break;

    std::vector<Action> actions;
    std::vector<int> action_idx(n, -1);
    std::vector<EgoSelfState> ego_obs(n);
    std::vector<std::vector<EgoNeighborState>> neighbor_obs(n);

    for (int i : active) {
      std::vector<GlobalAgentState> others;
      others.reserve(n - 1);
      for (int j = 0; j < n; ++j) {
        if (j != i) others.push_back(states[j]);
      }
      int idx = 0;
      switch (spec.agents[i].policy) {
        case PolicyTag::NonCooperative:
          idx = non_cooperative(states[i], spaces[i]);
          break;
        case PolicyTag::ZeroVelocity:
          idx = zero_velocity(spaces[i]);
          break;
        case PolicyTag::GA3C_CADRL: {
          auto [ego, neighbors] = to_ego_frame(states[i], others);
          const Vec2 ego_vel =
              rotate(states[i].vel, -ego_frame_angle(states[i]));
          auto ordered = order_neighbors(cfg.ordering, ego_vel, neighbors);
          if (cfg.sample_actions) {
            const ForwardTrace tr = network_forward(*net, ego, ordered);
            idx = sample_index(tr.probs, rng);
          } else {
            idx = ga3c_inference(states[i], others, *net, spaces[i],
                                 cfg.ordering);
          }
          ego_obs[i] = ego;
          neighbor_obs[i] = std::move(ordered);
          break;
        }
        case PolicyTag::CADRL_Lookahead:
          idx = cadrl_lookahead(states[i], others, *net, spaces[i], cfg.sim,
                                cfg.lookahead);
          break;
      }
      action_idx[i] = idx;
      actions.push_back(spaces[i][idx]);
    }

    const StepResult result = step_env(states, actions, t_after, cfg.sim);
    for (int i : active) {
      const GlobalAgentState& s = result.states[i];
      log.records.push_back({t_after, i, s.pos, s.vel, s.heading,
                             action_idx[i], result.rewards[i], s.status});
      if (s.status == AgentStatus::AtGoal) log.time_to_goal[i] = t_after;
      log.final_status[i] = s.status;
      if (observer) {
        observer(i, step, ego_obs[i], neighbor_obs[i], action_idx[i],
                 result.rewards[i], s.status != AgentStatus::Active);
      }
    }
    states = result.states;
    log.duration = t_after;
  }
  return log;
}

}  // namespace gcdl
