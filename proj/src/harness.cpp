#include "gcdl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace gcdl {

namespace {

ScenarioSpec eval_scenario(int n_agents, std::uint64_t seed, PolicyTag policy) {
  ScenarioSpec spec;
  if (n_agents >= 2) {
    spec = random_test_case(n_agents, seed);
  } else {
    // Solo case: same parameter ranges, no interaction constraints.
    spec.domain_side = 8.0;
    spec.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-4.0, 4.0);
    std::uniform_real_distribution<double> radius(0.2, 0.8);
    std::uniform_real_distribution<double> vpref(0.5, 2.0);
    AgentSpec a;
    a.radius = radius(rng);
    a.v_pref = vpref(rng);
    a.start = Vec2(coord(rng), coord(rng));
    do {
      a.goal = Vec2(coord(rng), coord(rng));
    } while ((a.goal - a.start).norm() < 2.0);
    spec.agents.push_back(a);
  }
  for (AgentSpec& a : spec.agents) a.policy = policy;
  return spec;
}

double nearest_rank(const std::vector<double>& sorted, double pct) {
  const std::size_t n = sorted.size();
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(pct * static_cast<double>(n)));
  return sorted[std::min(n - 1, std::max<std::size_t>(rank, 1) - 1)];
}

}  // namespace

EvalReport evaluate(PolicyTag policy, int n_agents, int n_cases,
                    const RolloutConfig& cfg, std::uint64_t seed,
                    const NetworkParams* net) {
  if (n_cases < 1 || n_agents < 1) {
    throw std::invalid_argument("evaluate: need at least 1 case and 1 agent");
  }
  if (needs_network(policy) && net == nullptr) {
    throw std::runtime_error("evaluate: policy requires a checkpoint");
  }

  // Case seeds depend only on (seed), so every policy sees the same cases.
  std::mt19937_64 seeder(seed);
  std::vector<std::uint64_t> case_seeds(n_cases);
  for (auto& s : case_seeds) s = seeder();

  int collisions = 0, stuck = 0;
  std::vector<double> extra_times;

  for (int c = 0; c < n_cases; ++c) {
    const ScenarioSpec spec = eval_scenario(n_agents, case_seeds[c], policy);
    RolloutConfig rollout = cfg;
    rollout.sample_actions = false;
    const EpisodeLog log = run_episode(spec, net, rollout);
    const std::vector<AgentResult> results = episode_metrics(log, spec);

    bool any_collision = false, any_stuck = false;
    for (const AgentResult& r : results) {
      if (r.outcome == Outcome::Collision) any_collision = true;
      if (r.outcome == Outcome::Stuck) any_stuck = true;
      if (r.outcome == Outcome::Success && r.extra_time) {
        extra_times.push_back(*r.extra_time);
      }
    }
    if (any_collision) {
      ++collisions;
    } else if (any_stuck) {
      ++stuck;
    }
  }

  EvalReport report;
  report.policy = to_string(policy);
  report.n_agents = n_agents;
  report.n_cases = n_cases;
  report.seed = seed;
  report.pct_collision = 100.0 * collisions / n_cases;
  report.pct_stuck = 100.0 * stuck / n_cases;
  report.pct_success = 100.0 * (n_cases - collisions - stuck) / n_cases;

  if (!extra_times.empty()) {
    std::sort(extra_times.begin(), extra_times.end());
    double sum = 0.0;
    for (double t : extra_times) sum += t;
    report.extra_time.mean = sum / static_cast<double>(extra_times.size());
    report.extra_time.p75 = nearest_rank(extra_times, 0.75);
    report.extra_time.p90 = nearest_rank(extra_times, 0.90);
    report.extra_time.count = static_cast<int>(extra_times.size());
  }
  return report;
}

std::string report_json(const EvalReport& r) {
  nlohmann::json j{{"policy", r.policy},
                   {"n_agents", r.n_agents},
                   {"n_cases", r.n_cases},
                   {"seed", r.seed},
                   {"pct_collision", r.pct_collision},
                   {"pct_stuck", r.pct_stuck},
                   {"pct_success", r.pct_success},
                   {"extra_time",
                    {{"mean", r.extra_time.mean},
                     {"p75", r.extra_time.p75},
                     {"p90", r.extra_time.p90},
                     {"count", r.extra_time.count}}}};
  return j.dump(2) + "\n";
}

FormationTask load_formation_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open goals file: " + path.string());
  nlohmann::json j;
  in >> j;
  FormationTask task;
  for (const auto& formation : j) {
    std::vector<Vec2> goals;
    for (const auto& pt : formation) {
      goals.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
    }
    task.formations.push_back(std::move(goals));
  }
  if (task.formations.empty()) {
    throw std::runtime_error("goals file holds no formations");
  }
  const std::size_t n = task.formations.front().size();
  for (const auto& f : task.formations) {
    if (f.size() != n) {
      throw std::runtime_error("formations must all have the same size");
    }
  }
  return task;
}

std::vector<EpisodeLog> run_formation(const FormationTask& task,
                                      PolicyTag policy,
                                      const FormationConfig& cfg,
                                      std::uint64_t seed,
                                      const NetworkParams* net) {
  const int n = static_cast<int>(task.formations.front().size());

  // Spawn on a line below the goal region.
  double min_y = task.formations[0][0].y();
  for (const auto& f : task.formations) {
    for (const Vec2& p : f) min_y = std::min(min_y, p.y());
  }
  std::vector<Vec2> starts;
  for (int i = 0; i < n; ++i) {
    starts.emplace_back((i - (n - 1) / 2.0) * cfg.spawn_spacing, min_y - 2.0);
  }

  std::mt19937_64 rng(seed);
  std::vector<EpisodeLog> logs;

  for (const std::vector<Vec2>& goals : task.formations) {
    std::vector<int> assignment(n);
    for (int i = 0; i < n; ++i) assignment[i] = i;
    std::shuffle(assignment.begin(), assignment.end(), rng);

    ScenarioSpec spec;
    spec.domain_side = 0.0;  // informational only
    spec.seed = rng();
    for (int i = 0; i < n; ++i) {
      AgentSpec a;
      a.start = starts[i];
      a.goal = goals[assignment[i]];
      a.radius = cfg.agent_radius;
      a.v_pref = cfg.v_pref;
      a.policy = policy;
      spec.agents.push_back(a);
    }

    RolloutConfig rollout = cfg.rollout;
    rollout.sample_actions = false;
    EpisodeLog log = run_episode(spec, net, rollout);

    // Carry final positions into the next round.
    for (const StepRecord& r : log.records) starts[r.agent] = r.pos;
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace gcdl
