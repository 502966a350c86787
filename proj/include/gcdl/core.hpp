#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

namespace gcdl {

using Vec2 = Eigen::Vector2d;

enum class AgentStatus { Active, AtGoal, Collided, TimedOut };

const char* to_string(AgentStatus s);

/// Full world-frame state of one agent, observable and hidden parts together.
struct GlobalAgentState {
  Vec2 pos{0.0, 0.0};
  Vec2 vel{0.0, 0.0};
  double heading = 0.0;  // world frame, radians in (-pi, pi]
  double radius = 0.3;
  Vec2 goal{0.0, 0.0};
  double v_pref = 1.0;
  AgentStatus status = AgentStatus::Active;

  double dist_to_goal() const { return (goal - pos).norm(); }
  double speed() const { return vel.norm(); }
};

/// Rotation-invariant self state: [d_g, v_pref, psi, r].
struct EgoSelfState {
  double dist_to_goal = 0.0;
  double v_pref = 1.0;
  double heading = 0.0;  // ego frame
  double radius = 0.3;

  Eigen::Vector4d vec() const {
    return Eigen::Vector4d(dist_to_goal, v_pref, heading, radius);
  }
};

/// One neighbor in the ego frame: [px, py, vx, vy, r, dist, r+r_ego].
struct EgoNeighborState {
  Vec2 pos{0.0, 0.0};
  Vec2 vel{0.0, 0.0};
  double radius = 0.3;
  double dist = 0.0;             // center distance to the ego agent
  double combined_radius = 0.6;  // neighbor radius + ego radius

  Eigen::Matrix<double, 7, 1> vec() const {
    Eigen::Matrix<double, 7, 1> v;
    v << pos.x(), pos.y(), vel.x(), vel.y(), radius, dist, combined_radius;
    return v;
  }
};

struct Action {
  double speed = 0.0;          // m/s
  double heading_delta = 0.0;  // radians, |delta| <= pi/6
};

/// The discrete action set for a given preferred speed. Index order is the
/// network's output coordinate: full-speed block, then half-speed, then
/// zero-speed.
struct ActionSpace {
  double v_pref = 1.0;
  std::vector<Action> actions;

  int size() const { return static_cast<int>(actions.size()); }
  const Action& operator[](int i) const { return actions[i]; }
};

constexpr int kNumActions = 11;
constexpr int kFullSpeedBlockSize = 6;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

Vec2 rotate(const Vec2& v, double angle);

/// 6 full-speed headings evenly spaced in [-pi/6, pi/6], 3 at half speed
/// {-pi/6, 0, pi/6}, 2 at zero speed {-pi/6, pi/6}. The zero-speed zero-turn
/// no-op is excluded; pass include_noop=true for the 12-action variant.
ActionSpace build_action_space(double v_pref, bool include_noop = false);

/// Angle of the ego frame's x-axis in world coordinates: toward the goal, or
/// the current heading when the agent sits exactly on its goal.
double ego_frame_angle(const GlobalAgentState& self);

std::pair<EgoSelfState, std::vector<EgoNeighborState>> to_ego_frame(
    const GlobalAgentState& self, std::span<const GlobalAgentState> others);

/// One-shot unicycle update: turn by heading_delta, then translate at the
/// action speed for dt seconds.
GlobalAgentState kinematic_step(const GlobalAgentState& state,
                                const Action& action, double dt);

}  // namespace gcdl
