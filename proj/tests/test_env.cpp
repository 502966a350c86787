#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>

#include "gcdl/env.hpp"
#include "gcdl/rollout.hpp"

using namespace gcdl;

namespace {

GlobalAgentState agent_at(Vec2 pos, double radius = 0.3, Vec2 goal = {10, 10},
                          double v_pref = 1.0) {
  GlobalAgentState s;
  s.pos = pos;
  s.radius = radius;
  s.goal = goal;
  s.v_pref = v_pref;
  return s;
}

}  // namespace

TEST_CASE("random_test_case respects parameter ranges and domain size") {
  const ScenarioSpec small = random_test_case(2, 7);
  CHECK(small.domain_side == 8.0);
  CHECK(small.agents.size() == 2);
  for (const AgentSpec& a : small.agents) {
    CHECK(a.radius >= 0.2);
    CHECK(a.radius <= 0.8);
    CHECK(a.v_pref >= 0.5);
    CHECK(a.v_pref <= 2.0);
    CHECK((a.goal - a.start).norm() >= 2.0);
    CHECK(std::abs(a.start.x()) <= 4.0);
    CHECK(std::abs(a.start.y()) <= 4.0);
  }
  CHECK((small.agents[0].start - small.agents[1].start).norm() >
        small.agents[0].radius + small.agents[1].radius);

  CHECK(random_test_case(10, 3).domain_side == 12.0);
  CHECK_THROWS_AS(random_test_case(1, 0), std::invalid_argument);
}

TEST_CASE("random_training_case forces crossing paths") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 40ull}) {
    const ScenarioSpec spec = random_training_case(3, seed);
    REQUIRE(spec.agents.size() == 3);
    const double circle = spec.domain_side / 2.0;
    CHECK(circle >= 2.5);
    CHECK(circle <= 4.0);
    for (const AgentSpec& a : spec.agents) {
      // Start on the circle, goal near the antipode.
      CHECK(a.start.norm() == doctest::Approx(circle));
      CHECK((a.goal + a.start).norm() <= std::sqrt(2.0) * 0.5 + 1e-12);
      CHECK(a.radius >= 0.2);
      CHECK(a.radius <= 0.8);
      CHECK(a.v_pref >= 0.5);
      CHECK(a.v_pref <= 2.0);
      // The straight-line path passes near the center.
      const Vec2 dir = (a.goal - a.start).normalized();
      const double center_dist =
          std::abs(dir.x() * (-a.start.y()) - dir.y() * (-a.start.x()));
      CHECK(center_dist < 0.5);
    }
  }
  // Deterministic and size-checked like the test generator.
  const ScenarioSpec a = random_training_case(2, 9);
  const ScenarioSpec b = random_training_case(2, 9);
  CHECK(a.agents[1].start == b.agents[1].start);
  CHECK_THROWS_AS(random_training_case(1, 0), std::invalid_argument);
}

TEST_CASE("random_test_case is deterministic under a fixed seed") {
  const ScenarioSpec a = random_test_case(4, 123);
  const ScenarioSpec b = random_test_case(4, 123);
  REQUIRE(a.agents.size() == b.agents.size());
  for (std::size_t i = 0; i < a.agents.size(); ++i) {
    CHECK(a.agents[i].start == b.agents[i].start);
    CHECK(a.agents[i].goal == b.agents[i].goal);
    CHECK(a.agents[i].radius == b.agents[i].radius);
    CHECK(a.agents[i].v_pref == b.agents[i].v_pref);
  }
}

TEST_CASE("d_min") {
  const auto self = agent_at({0, 0});
  CHECK(d_min(self, std::vector{agent_at({1, 0})}) == doctest::Approx(0.4));
  CHECK(d_min(self, std::vector{agent_at({0.5, 0})}) == doctest::Approx(-0.1));
  CHECK(d_min(self, std::vector{agent_at({1.6, 0}), agent_at({1.3, 0})}) ==
        doctest::Approx(0.7));
  CHECK(d_min(self, {}) == std::numeric_limits<double>::infinity());
}

TEST_CASE("reward matches the sparse specification exactly") {
  SimConfig cfg;
  auto self = agent_at({0, 0});

  // d_min = 0.1 via an agent at center distance 0.7
  CHECK(reward(self, std::vector{agent_at({0.7, 0})}, cfg) ==
        doctest::Approx(-0.05));
  // overlap
  CHECK(reward(self, std::vector{agent_at({0.5, 0})}, cfg) == -0.25);
  // at goal, nobody close
  auto at_goal = agent_at({10, 10});
  CHECK(reward(at_goal, std::vector{agent_at({0, 0})}, cfg) == 1.0);
  // free space
  CHECK(reward(self, std::vector{agent_at({5, 0})}, cfg) == 0.0);
  // collision beats goal
  auto conflicted = agent_at({10, 10});
  CHECK(reward(conflicted, std::vector{agent_at({10.1, 10})}, cfg) == -0.25);
  // goal beats near-miss
  CHECK(reward(at_goal, std::vector{agent_at({10.7, 10})}, cfg) == 1.0);
}

TEST_CASE("reward bounded on random states") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  SimConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    auto self = agent_at({coord(rng), coord(rng)});
    std::vector<GlobalAgentState> others{agent_at({coord(rng), coord(rng)})};
    const double r = reward(self, others, cfg);
    CHECK(r >= -0.25);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("step_env advances simultaneously and applies statuses") {
  SimConfig cfg;
  SUBCASE("head-on pair collides") {
    // Surface distance 0.3; each moves 0.2 toward the other.
    auto a = agent_at({0, 0}, 0.3, {5, 0});
    auto b = agent_at({0.9, 0}, 0.3, {-5, 0});
    b.heading = std::numbers::pi;
    const std::vector<Action> actions{{1.0, 0.0}, {1.0, 0.0}};
    const StepResult r =
        step_env(std::vector{a, b}, actions, cfg.dt, cfg);
    CHECK(r.states[0].status == AgentStatus::Collided);
    CHECK(r.states[1].status == AgentStatus::Collided);
    CHECK(r.rewards[0] == -0.25);
    CHECK(r.rewards[1] == -0.25);
    // Post-step center distance: 0.9 - 0.2 - 0.2 = 0.5 < combined radius.
    CHECK((r.states[0].pos - r.states[1].pos).norm() == doctest::Approx(0.5));
  }
  SUBCASE("goal reached within tolerance") {
    auto a = agent_at({0, 0}, 0.3, {0.4, 0});
    auto far = agent_at({50, 50});
    const StepResult r = step_env(std::vector{a, far},
                                  std::vector<Action>{{1.0, 0.0}, {1.0, 0.0}},
                                  cfg.dt, cfg);
    CHECK(r.states[0].status == AgentStatus::AtGoal);
    CHECK(r.rewards[0] == 1.0);
  }
  SUBCASE("timeout marks remaining agents") {
    auto a = agent_at({0, 0}, 0.3, {50, 0});
    auto b = agent_at({5, 5}, 0.3, {50, 50});
    const StepResult r = step_env(std::vector{a, b},
                                  std::vector<Action>{{0.0, 0.0}, {0.0, 0.0}},
                                  cfg.timeout, cfg);
    CHECK(r.states[0].status == AgentStatus::TimedOut);
    CHECK(r.states[1].status == AgentStatus::TimedOut);
  }
  SUBCASE("action count mismatch") {
    auto a = agent_at({0, 0});
    auto b = agent_at({3, 0});
    CHECK_THROWS_AS(step_env(std::vector{a, b},
                             std::vector<Action>{{1.0, 0.0}}, cfg.dt, cfg),
                    std::invalid_argument);
  }
  SUBCASE("inactive agents stay frozen and need no action") {
    auto a = agent_at({0, 0}, 0.3, {5, 0});
    auto b = agent_at({3, 0});
    b.status = AgentStatus::AtGoal;
    const StepResult r = step_env(std::vector{a, b},
                                  std::vector<Action>{{1.0, 0.0}}, cfg.dt, cfg);
    CHECK(r.states[1].pos == b.pos);
    CHECK(r.states[1].status == AgentStatus::AtGoal);
    CHECK(r.rewards[1] == 0.0);
  }
}

TEST_CASE("step_env is order independent") {
  SimConfig cfg;
  std::vector<GlobalAgentState> states{agent_at({0, 0}, 0.3, {5, 0}),
                                       agent_at({2, 1}, 0.4, {-5, 0}),
                                       agent_at({-1, -2}, 0.2, {0, 5})};
  std::vector<Action> actions{{1.0, 0.1}, {0.5, -0.2}, {1.5, 0.0}};

  const StepResult forward = step_env(states, actions, cfg.dt, cfg);

  const std::vector<int> perm{2, 0, 1};
  std::vector<GlobalAgentState> permuted;
  std::vector<Action> permuted_actions;
  for (int i : perm) {
    permuted.push_back(states[i]);
    permuted_actions.push_back(actions[i]);
  }
  const StepResult swapped = step_env(permuted, permuted_actions, cfg.dt, cfg);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    CHECK(swapped.states[k].pos == forward.states[perm[k]].pos);
    CHECK(swapped.rewards[k] == forward.rewards[perm[k]]);
  }
}

TEST_CASE("episode metrics and straight-line runs") {
  SUBCASE("unobstructed straight run has near-zero extra time") {
    ScenarioSpec spec;
    spec.seed = 1;
    spec.agents.push_back({{0, 0}, {5, 0}, 0.3, 1.0, PolicyTag::NonCooperative});
    spec.agents.push_back({{0, 20}, {5, 20}, 0.3, 1.0, PolicyTag::NonCooperative});
    RolloutConfig cfg;
    const EpisodeLog log = run_episode(spec, nullptr, cfg);
    const auto results = episode_metrics(log, spec);
    for (const AgentResult& r : results) {
      REQUIRE(r.outcome == Outcome::Success);
      CHECK(*r.extra_time >= -cfg.sim.dt);
      CHECK(*r.extra_time < cfg.sim.dt);
    }
  }
  SUBCASE("outcome classification") {
    ScenarioSpec spec;
    spec.agents.push_back({{0, 0}, {5, 0}, 0.3, 1.0, PolicyTag::NonCooperative});
    spec.agents.push_back({{0, 20}, {5, 20}, 0.3, 1.0, PolicyTag::NonCooperative});
    EpisodeLog log;
    log.final_status = {AgentStatus::Collided, AgentStatus::TimedOut};
    log.time_to_goal = {0.0, 0.0};
    const auto results = episode_metrics(log, spec);
    CHECK(results[0].outcome == Outcome::Collision);
    CHECK(!results[0].extra_time.has_value());
    CHECK(results[1].outcome == Outcome::Stuck);
  }
}

TEST_CASE("episodes terminate within the step bound") {
  // Zero-velocity agents never reach goals; the episode must still end.
  ScenarioSpec spec;
  spec.agents.push_back({{0, 0}, {5, 0}, 0.3, 1.0, PolicyTag::ZeroVelocity});
  spec.agents.push_back({{3, 0}, {-5, 0}, 0.3, 1.0, PolicyTag::ZeroVelocity});
  RolloutConfig cfg;
  cfg.sim.timeout = 6.0;
  const EpisodeLog log = run_episode(spec, nullptr, cfg);
  CHECK(log.duration <= cfg.sim.timeout + 1e-9);
  CHECK(log.final_status[0] == AgentStatus::TimedOut);
  // Frozen-at-start: zero-velocity agents never move.
  for (const StepRecord& r : log.records) {
    CHECK(r.pos == spec.agents[r.agent].start);
  }
}

TEST_CASE("scenario JSON round trip") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "gcdl_scenario_test.json";
  ScenarioSpec spec = random_test_case(3, 99);
  spec.agents[0].policy = PolicyTag::GA3C_CADRL;
  spec.agents[1].policy = PolicyTag::CADRL_Lookahead;
  save_scenario(spec, path);
  const ScenarioSpec loaded = load_scenario(path);
  CHECK(loaded.domain_side == spec.domain_side);
  CHECK(loaded.seed == spec.seed);
  REQUIRE(loaded.agents.size() == spec.agents.size());
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    CHECK(loaded.agents[i].start == spec.agents[i].start);
    CHECK(loaded.agents[i].goal == spec.agents[i].goal);
    CHECK(loaded.agents[i].radius == spec.agents[i].radius);
    CHECK(loaded.agents[i].v_pref == spec.agents[i].v_pref);
    CHECK(loaded.agents[i].policy == spec.agents[i].policy);
  }
  std::filesystem::remove(path);
}

TEST_CASE("trajectory CSV replays through the simulator") {
  ScenarioSpec spec = random_test_case(3, 17);
  RolloutConfig cfg;
  const EpisodeLog log = run_episode(spec, nullptr, cfg);

  const auto path =
      std::filesystem::temp_directory_path() / "gcdl_traj_test.csv";
  save_trajectory(log, path);
  const EpisodeLog loaded = load_trajectory(path);
  REQUIRE(loaded.records.size() == log.records.size());

  // Re-step the logged actions and compare positions.
  std::vector<GlobalAgentState> states = initial_states(spec);
  std::vector<ActionSpace> spaces;
  for (const AgentSpec& a : spec.agents) {
    spaces.push_back(build_action_space(a.v_pref));
  }
  for (const StepRecord& r : loaded.records) {
    GlobalAgentState& s = states[r.agent];
    s = kinematic_step(s, spaces[r.agent][r.action_idx], cfg.sim.dt);
    CHECK((s.pos - r.pos).norm() < 1e-9);
  }
  std::filesystem::remove(path);
}
