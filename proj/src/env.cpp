#include "gcdl/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gcdl {

namespace {

AgentStatus status_from_string(const std::string& s) {
  if (s == "active") return AgentStatus::Active;
  if (s == "at_goal") return AgentStatus::AtGoal;
  if (s == "collided") return AgentStatus::Collided;
  if (s == "timed_out") return AgentStatus::TimedOut;
  throw std::runtime_error("unknown agent status: " + s);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const char* to_string(PolicyTag tag) {
  switch (tag) {
    case PolicyTag::NonCooperative:
      return "noncoop";
    case PolicyTag::ZeroVelocity:
      return "zero";
    case PolicyTag::GA3C_CADRL:
      return "ga3c";
    case PolicyTag::CADRL_Lookahead:
      return "cadrl";
  }
  return "unknown";
}

PolicyTag policy_tag_from_string(const std::string& s) {
  if (s == "noncoop") return PolicyTag::NonCooperative;
  if (s == "zero") return PolicyTag::ZeroVelocity;
  if (s == "ga3c") return PolicyTag::GA3C_CADRL;
  if (s == "cadrl") return PolicyTag::CADRL_Lookahead;
  throw std::invalid_argument("unknown policy tag: " + s);
}

ScenarioSpec random_test_case(int n_agents, std::uint64_t seed) {
  if (n_agents < 2) {
    throw std::invalid_argument("random_test_case: need at least 2 agents");
  }
  constexpr int kMaxAttempts = 10000;
  constexpr double kMinStartGoalDist = 2.0;

  ScenarioSpec spec;
  spec.domain_side = n_agents < 10 ? 8.0 : 12.0;
  spec.seed = seed;

  std::mt19937_64 rng(seed);
  const double half = spec.domain_side / 2.0;
  std::uniform_real_distribution<double> coord(-half, half);
  std::uniform_real_distribution<double> radius_dist(0.2, 0.8);
  std::uniform_real_distribution<double> vpref_dist(0.5, 2.0);

  int attempts = 0;
  for (int i = 0; i < n_agents; ++i) {
    AgentSpec a;
    a.radius = radius_dist(rng);
    a.v_pref = vpref_dist(rng);
    while (true) {
      if (++attempts > kMaxAttempts) {
        throw std::runtime_error("random_test_case: rejection sampling failed");
      }
      a.start = Vec2(coord(rng), coord(rng));
      bool overlap = false;
      for (const AgentSpec& b : spec.agents) {
        if ((a.start - b.start).norm() <= a.radius + b.radius) {
          overlap = true;
          break;
        }
      }
      if (!overlap) break;
    }
    while (true) {
      if (++attempts > kMaxAttempts) {
        throw std::runtime_error("random_test_case: rejection sampling failed");
      }
      a.goal = Vec2(coord(rng), coord(rng));
      if ((a.goal - a.start).norm() >= kMinStartGoalDist) break;
    }
    spec.agents.push_back(a);
  }
  return spec;
}

ScenarioSpec random_training_case(int n_agents, std::uint64_t seed) {
  if (n_agents < 2) {
    throw std::invalid_argument(
        "random_training_case: need at least 2 agents");
  }
  constexpr int kMaxAttempts = 10000;

  ScenarioSpec spec;
  spec.seed = seed;

  std::mt19937_64 rng(seed);
  // Everyone starts on a circle and heads for (roughly) the antipode, so all
  // paths cross near the center and interaction is guaranteed; uniform-box
  // draws leave most episodes interaction-free.
  std::uniform_real_distribution<double> circle_dist(2.5, 4.0);
  std::uniform_real_distribution<double> angle_dist(-std::numbers::pi,
                                                    std::numbers::pi);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  std::uniform_real_distribution<double> radius_dist(0.2, 0.8);
  std::uniform_real_distribution<double> vpref_dist(0.5, 2.0);

  const double circle = circle_dist(rng);
  spec.domain_side = 2.0 * circle;

  int attempts = 0;
  for (int i = 0; i < n_agents; ++i) {
    AgentSpec a;
    a.radius = radius_dist(rng);
    a.v_pref = vpref_dist(rng);
    while (true) {
      if (++attempts > kMaxAttempts) {
        throw std::runtime_error(
            "random_training_case: rejection sampling failed");
      }
      const double theta = angle_dist(rng);
      a.start = circle * Vec2(std::cos(theta), std::sin(theta));
      bool overlap = false;
      for (const AgentSpec& b : spec.agents) {
        if ((a.start - b.start).norm() <= a.radius + b.radius) {
          overlap = true;
          break;
        }
      }
      if (!overlap) break;
    }
    a.goal = -a.start + Vec2(jitter(rng), jitter(rng));
    spec.agents.push_back(a);
  }
  return spec;
}

std::vector<GlobalAgentState> initial_states(const ScenarioSpec& spec) {
  std::vector<GlobalAgentState> states;
  states.reserve(spec.agents.size());
  for (const AgentSpec& a : spec.agents) {
    GlobalAgentState s;
    s.pos = a.start;
    s.vel = Vec2(0.0, 0.0);
    const Vec2 to_goal = a.goal - a.start;
    s.heading = to_goal.norm() > 0.0 ? std::atan2(to_goal.y(), to_goal.x()) : 0.0;
    s.radius = a.radius;
    s.goal = a.goal;
    s.v_pref = a.v_pref;
    states.push_back(s);
  }
  return states;
}

double d_min(const GlobalAgentState& self,
             std::span<const GlobalAgentState> others) {
  double best = std::numeric_limits<double>::infinity();
  for (const GlobalAgentState& o : others) {
    best = std::min(best, (o.pos - self.pos).norm() - self.radius - o.radius);
  }
  return best;
}

double reward(const GlobalAgentState& self,
              std::span<const GlobalAgentState> others, const SimConfig& cfg) {
  const double dm = d_min(self, others);
  if (dm < 0.0) return cfg.reward_collision;
  if (self.dist_to_goal() <= cfg.goal_tol_for(self)) return cfg.reward_goal;
  if (dm < cfg.near_miss_margin) return cfg.near_miss_base + dm / 2.0;
  return 0.0;
}

StepResult step_env(std::span<const GlobalAgentState> states,
                    std::span<const Action> actions, double t_after,
                    const SimConfig& cfg) {
  std::vector<int> active;
  for (int i = 0; i < static_cast<int>(states.size()); ++i) {
    if (states[i].status == AgentStatus::Active) active.push_back(i);
  }
  if (actions.size() != active.size()) {
    throw std::invalid_argument("step_env: one action per active agent required");
  }

  StepResult out;
  out.states.assign(states.begin(), states.end());
  out.rewards.assign(states.size(), 0.0);

  // Simultaneous update: all moves computed from the pre-step snapshot.
  for (std::size_t k = 0; k < active.size(); ++k) {
    out.states[active[k]] = kinematic_step(states[active[k]], actions[k], cfg.dt);
  }

  for (int i : active) {
    std::vector<GlobalAgentState> others;
    others.reserve(out.states.size() - 1);
    for (int j = 0; j < static_cast<int>(out.states.size()); ++j) {
      if (j != i) others.push_back(out.states[j]);
    }
    GlobalAgentState& s = out.states[i];
    out.rewards[i] = reward(s, others, cfg);
    if (d_min(s, others) < 0.0) {
      s.status = AgentStatus::Collided;
    } else if (s.dist_to_goal() <= cfg.goal_tol_for(s)) {
      s.status = AgentStatus::AtGoal;
    } else if (t_after >= cfg.timeout - 1e-9) {
      s.status = AgentStatus::TimedOut;
    }
  }
  return out;
}

int max_steps(const SimConfig& cfg) {
  return static_cast<int>(std::ceil(cfg.timeout / cfg.dt - 1e-9));
}

std::vector<AgentResult> episode_metrics(const EpisodeLog& log,
                                         const ScenarioSpec& spec) {
  std::vector<AgentResult> results(spec.agents.size());
  for (std::size_t i = 0; i < spec.agents.size(); ++i) {
    AgentResult& r = results[i];
    switch (log.final_status[i]) {
      case AgentStatus::AtGoal: {
        r.outcome = Outcome::Success;
        const double straight =
            (spec.agents[i].goal - spec.agents[i].start).norm() /
            spec.agents[i].v_pref;
        r.extra_time = log.time_to_goal[i] - straight;
        break;
      }
      case AgentStatus::Collided:
        r.outcome = Outcome::Collision;
        break;
      default:
        r.outcome = Outcome::Stuck;
        break;
    }
  }
  return results;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path.string());
  nlohmann::json j;
  in >> j;
  ScenarioSpec spec;
  spec.domain_side = j.at("domain_side_m").get<double>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& ja : j.at("agents")) {
    AgentSpec a;
    a.start = Vec2(ja.at("px").get<double>(), ja.at("py").get<double>());
    a.goal = Vec2(ja.at("gx").get<double>(), ja.at("gy").get<double>());
    a.radius = ja.at("radius").get<double>();
    a.v_pref = ja.at("v_pref").get<double>();
    a.policy = policy_tag_from_string(ja.at("policy").get<std::string>());
    spec.agents.push_back(a);
  }
  return spec;
}

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path) {
  nlohmann::json j;
  j["domain_side_m"] = spec.domain_side;
  j["seed"] = spec.seed;
  j["agents"] = nlohmann::json::array();
  for (const AgentSpec& a : spec.agents) {
    j["agents"].push_back({{"px", a.start.x()},
                           {"py", a.start.y()},
                           {"gx", a.goal.x()},
                           {"gy", a.goal.y()},
                           {"radius", a.radius},
                           {"v_pref", a.v_pref},
                           {"policy", to_string(a.policy)}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path.string());
  out << j.dump(2) << "\n";
}

std::string trajectory_csv(const EpisodeLog& log) {
  std::ostringstream os;
  os << "t,agent_id,px,py,vx,vy,heading,action_idx,reward,status\n";
  for (const StepRecord& r : log.records) {
    os << fmt_double(r.t) << ',' << r.agent << ',' << fmt_double(r.pos.x())
       << ',' << fmt_double(r.pos.y()) << ',' << fmt_double(r.vel.x()) << ','
       << fmt_double(r.vel.y()) << ',' << fmt_double(r.heading) << ','
       << r.action_idx << ',' << fmt_double(r.reward) << ','
       << to_string(r.status) << '\n';
  }
  return os.str();
}

void save_trajectory(const EpisodeLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path.string());
  out << trajectory_csv(log);
}

EpisodeLog load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory: " + path.string());
  EpisodeLog log;
  std::string line;
  std::getline(in, line);  // header
  int max_agent = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    StepRecord r;
    auto next = [&]() {
      if (!std::getline(ls, field, ',')) {
        throw std::runtime_error("malformed trajectory row: " + line);
      }
      return field;
    };
    r.t = std::stod(next());
    r.agent = std::stoi(next());
    r.pos.x() = std::stod(next());
    r.pos.y() = std::stod(next());
    r.vel.x() = std::stod(next());
    r.vel.y() = std::stod(next());
    r.heading = std::stod(next());
    r.action_idx = std::stoi(next());
    r.reward = std::stod(next());
    r.status = status_from_string(next());
    max_agent = std::max(max_agent, r.agent);
    log.records.push_back(r);
    log.duration = std::max(log.duration, r.t);
  }
  log.final_status.assign(max_agent + 1, AgentStatus::Active);
  log.time_to_goal.assign(max_agent + 1, 0.0);
  for (const StepRecord& r : log.records) {
    log.final_status[r.agent] = r.status;
    if (r.status == AgentStatus::AtGoal &&
        log.time_to_goal[r.agent] == 0.0) {
      log.time_to_goal[r.agent] = r.t;
    }
  }
  return log;
}

}  // namespace gcdl
