#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcdl/core.hpp"
#include "gcdl/policy_tag.hpp"

namespace gcdl {

struct AgentSpec {
  Vec2 start{0.0, 0.0};
  Vec2 goal{0.0, 0.0};
  double radius = 0.3;
  double v_pref = 1.0;
  PolicyTag policy = PolicyTag::NonCooperative;
};

struct ScenarioSpec {
  double domain_side = 8.0;
  std::uint64_t seed = 0;
  std::vector<AgentSpec> agents;
};

struct SimConfig {
  double dt = 0.2;        // s
  double timeout = 60.0;  // simulated s
  // Negative means "use the agent's radius" as the goal-reach tolerance.
  double goal_tolerance = -1.0;
  double reward_goal = 1.0;
  double reward_collision = -0.25;
  double near_miss_base = -0.1;
  double near_miss_margin = 0.2;  // m
  double gamma = 0.97;

  double goal_tol_for(const GlobalAgentState& a) const {
    return goal_tolerance < 0.0 ? a.radius : goal_tolerance;
  }
};

struct StepRecord {
  double t = 0.0;
  int agent = 0;
  Vec2 pos{0.0, 0.0};
  Vec2 vel{0.0, 0.0};
  double heading = 0.0;
  int action_idx = -1;
  double reward = 0.0;
  AgentStatus status = AgentStatus::Active;
};

struct EpisodeLog {
  std::vector<StepRecord> records;  // one row per active agent per step
  std::vector<AgentStatus> final_status;
  std::vector<double> time_to_goal;  // valid where final_status == AtGoal
  double duration = 0.0;
};

enum class Outcome { Success, Collision, Stuck };

struct AgentResult {
  Outcome outcome = Outcome::Success;
  std::optional<double> extra_time;  // t_g - straight-line time, successes only
};

/// Uniform random scenario: starts/goals in a square (side 8 m below 10
/// agents, 12 m from 10 up), non-overlapping starts, start-goal distance
/// >= 2 m, radii in [0.2, 0.8], v_pref in [0.5, 2.0].
ScenarioSpec random_test_case(int n_agents, std::uint64_t seed);

/// Forced-interaction scenario for training: agents start on a shared circle
/// with goals near the antipode, so straight-line paths cross at the center.
ScenarioSpec random_training_case(int n_agents, std::uint64_t seed);

std::vector<GlobalAgentState> initial_states(const ScenarioSpec& spec);

/// Surface-to-surface distance to the closest other agent; negative when
/// overlapping, +inf with no others.
double d_min(const GlobalAgentState& self,
             std::span<const GlobalAgentState> others);

/// Sparse reward on the post-step state. Precedence when conditions
/// co-occur: collision > goal > near-miss > 0.
double reward(const GlobalAgentState& self,
              std::span<const GlobalAgentState> others, const SimConfig& cfg);

struct StepResult {
  std::vector<GlobalAgentState> states;
  std::vector<double> rewards;  // one per agent; 0 for inactive agents
};

/// Advances all active agents simultaneously from the same pre-step
/// snapshot. `actions` holds one entry per active agent, in agent index
/// order. `t_after` is the episode time after this step, used for timeout.
StepResult step_env(std::span<const GlobalAgentState> states,
                    std::span<const Action> actions, double t_after,
                    const SimConfig& cfg);

std::vector<AgentResult> episode_metrics(const EpisodeLog& log,
                                         const ScenarioSpec& spec);

int max_steps(const SimConfig& cfg);

// Scenario JSON and trajectory CSV formats.
ScenarioSpec load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path);
std::string trajectory_csv(const EpisodeLog& log);
void save_trajectory(const EpisodeLog& log, const std::filesystem::path& path);
EpisodeLog load_trajectory(const std::filesystem::path& path);

}  // namespace gcdl
