#include "gcdl/core.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gcdl {

namespace {
constexpr double kPi = std::numbers::pi;
}

const char* to_string(AgentStatus s) {
  switch (s) {
    case AgentStatus::Active:
      return "active";
    case AgentStatus::AtGoal:
      return "at_goal";
    case AgentStatus::Collided:
      return "collided";
    case AgentStatus::TimedOut:
      return "timed_out";
  }
  return "unknown";
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

ActionSpace build_action_space(double v_pref, bool include_noop) {
  if (!(v_pref > 0.0)) {
    throw std::invalid_argument("build_action_space: v_pref must be > 0");
  }
  constexpr double kMaxTurn = kPi / 6.0;
  ActionSpace space;
  space.v_pref = v_pref;
  for (int i = 0; i < kFullSpeedBlockSize; ++i) {
    // 6 points evenly spaced on [-pi/6, pi/6] inclusive:
    // -pi/6, -pi/10, -pi/30, pi/30, pi/10, pi/6.
    const double d = -kMaxTurn + 2.0 * kMaxTurn * i / (kFullSpeedBlockSize - 1);
    space.actions.push_back({v_pref, d});
  }
  for (double d : {-kMaxTurn, 0.0, kMaxTurn}) {
    space.actions.push_back({0.5 * v_pref, d});
  }
  space.actions.push_back({0.0, -kMaxTurn});
  if (include_noop) space.actions.push_back({0.0, 0.0});
  space.actions.push_back({0.0, kMaxTurn});
  return space;
}

double ego_frame_angle(const GlobalAgentState& self) {
  const Vec2 to_goal = self.goal - self.pos;
  if (to_goal.norm() == 0.0) return self.heading;
  return std::atan2(to_goal.y(), to_goal.x());
}

std::pair<EgoSelfState, std::vector<EgoNeighborState>> to_ego_frame(
    const GlobalAgentState& self, std::span<const GlobalAgentState> others) {
  const double frame = ego_frame_angle(self);

  EgoSelfState ego;
  ego.dist_to_goal = self.dist_to_goal();
  ego.v_pref = self.v_pref;
  ego.heading = wrap_angle(self.heading - frame);
  ego.radius = self.radius;

  std::vector<EgoNeighborState> neighbors;
  neighbors.reserve(others.size());
  for (const GlobalAgentState& o : others) {
    EgoNeighborState n;
    n.pos = rotate(o.pos - self.pos, -frame);
    n.vel = rotate(o.vel, -frame);
    n.radius = o.radius;
    n.dist = n.pos.norm();
    n.combined_radius = o.radius + self.radius;
    neighbors.push_back(n);
  }
  return {ego, std::move(neighbors)};
}

GlobalAgentState kinematic_step(const GlobalAgentState& state,
                                const Action& action, double dt) {
  GlobalAgentState next = state;
  next.heading = wrap_angle(state.heading + action.heading_delta);
  next.vel = action.speed * Vec2(std::cos(next.heading), std::sin(next.heading));
  next.pos = state.pos + dt * next.vel;
  return next;
}

}  // namespace gcdl
