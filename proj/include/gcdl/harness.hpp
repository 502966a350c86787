#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gcdl/rollout.hpp"

namespace gcdl {

struct ExtraTimeStats {
  double mean = 0.0;
  double p75 = 0.0;
  double p90 = 0.0;
  int count = 0;  // successful agents contributing
};

struct EvalReport {
  std::string policy;
  int n_agents = 0;
  int n_cases = 0;
  std::uint64_t seed = 0;
  double pct_collision = 0.0;
  double pct_stuck = 0.0;
  double pct_success = 0.0;
  ExtraTimeStats extra_time;
};

/// Runs n_cases seeded random scenarios with every agent on `policy`.
/// A case counts as collision if any agent collides, stuck if any agent
/// times out without a collision, else success. Extra-time statistics
/// aggregate per-agent over successful agents. The case set depends only on
/// (n_agents, n_cases, seed), so compared policies see identical cases.
EvalReport evaluate(PolicyTag policy, int n_agents, int n_cases,
                    const RolloutConfig& cfg, std::uint64_t seed,
                    const NetworkParams* net);

std::string report_json(const EvalReport& report);

struct FormationTask {
  std::vector<std::vector<Vec2>> formations;
};

FormationTask load_formation_task(const std::filesystem::path& path);

struct FormationConfig {
  RolloutConfig rollout;
  double agent_radius = 0.2;
  double v_pref = 1.0;
  double spawn_spacing = 1.5;  // initial line spacing, m
};

/// Runs the formations in order: goals randomly assigned each round, final
/// positions carried into the next round's starts. Agents spawn on a line
/// below the first formation. Timed-out rounds are logged and the sequence
/// continues.
std::vector<EpisodeLog> run_formation(const FormationTask& task,
                                      PolicyTag policy,
                                      const FormationConfig& cfg,
                                      std::uint64_t seed,
                                      const NetworkParams* net);

}  // namespace gcdl
