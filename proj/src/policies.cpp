#include "gcdl/policies.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace gcdl {

namespace {

Vec2 ego_velocity(const GlobalAgentState& self) {
  return rotate(self.vel, -ego_frame_angle(self));
}

// Propagates self by `action` and all others at constant velocity for dt
// seconds, then evaluates `score` on the joint state.
template <typename ScoreFn>
int best_propagated_action(const GlobalAgentState& self,
                           std::span<const GlobalAgentState> others,
                           const ActionSpace& space, double dt,
                           ScoreFn&& score) {
  std::vector<GlobalAgentState> propagated(others.begin(), others.end());
  for (GlobalAgentState& o : propagated) o.pos += dt * o.vel;

  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < space.size(); ++i) {
    const GlobalAgentState next = kinematic_step(self, space[i], dt);
    const double s = score(next, propagated);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

}  // namespace

int non_cooperative(const GlobalAgentState& self, const ActionSpace& space) {
  const Vec2 to_goal = self.goal - self.pos;
  const double bearing =
      to_goal.norm() > 0.0
          ? wrap_angle(std::atan2(to_goal.y(), to_goal.x()) - self.heading)
          : 0.0;
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kFullSpeedBlockSize; ++i) {
    const double err = std::abs(wrap_angle(bearing - space[i].heading_delta));
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return best;
}

int zero_velocity(const ActionSpace& space) {
  int best = -1;
  double best_turn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < space.size(); ++i) {
    if (space[i].speed != 0.0) continue;
    if (std::abs(space[i].heading_delta) < best_turn) {
      best_turn = std::abs(space[i].heading_delta);
      best = i;
    }
  }
  if (best < 0) throw std::invalid_argument("zero_velocity: no zero-speed action");
  return best;
}

int ga3c_inference(const GlobalAgentState& self,
                   std::span<const GlobalAgentState> others,
                   const NetworkParams& net, const ActionSpace& space,
                   OrderingStrategy ordering) {
  if (space.size() != net.meta.n_actions) {
    throw std::runtime_error("ga3c_inference: action space does not match policy head");
  }
  auto [ego, neighbors] = to_ego_frame(self, others);
  const auto ordered = order_neighbors(ordering, ego_velocity(self), neighbors);
  const ForwardTrace tr = network_forward(net, ego, ordered);
  int best = 0;
  for (int i = 1; i < net.meta.n_actions; ++i) {
    if (tr.probs(i) > tr.probs(best)) best = i;
  }
  return best;
}

double lookahead_collision_penalty(const GlobalAgentState& self,
                                   std::span<const GlobalAgentState> others,
                                   const SimConfig& cfg) {
  const double dm = d_min(self, others);
  if (dm < 0.0) return cfg.reward_collision;
  if (dm < cfg.near_miss_margin) return cfg.near_miss_base + dm / 2.0;
  return 0.0;
}

namespace {

double propagated_value(const GlobalAgentState& next,
                        std::span<const GlobalAgentState> others,
                        const NetworkParams& net,
                        const LookaheadConfig& look) {
  auto [ego, neighbors] = to_ego_frame(next, others);
  const auto ordered =
      order_neighbors(look.ordering, rotate(next.vel, -ego_frame_angle(next)),
                      neighbors);
  return network_forward(net, ego, ordered).value;
}

}  // namespace

int cadrl_lookahead(const GlobalAgentState& self,
                    std::span<const GlobalAgentState> others,
                    const NetworkParams& net, const ActionSpace& space,
                    const SimConfig& cfg, const LookaheadConfig& look) {
  const double discount =
      std::pow(cfg.gamma, look.propagation_dt * self.v_pref);
  return best_propagated_action(
      self, others, space, look.propagation_dt,
      [&](const GlobalAgentState& next,
          std::span<const GlobalAgentState> propagated) {
        return lookahead_collision_penalty(next, propagated, cfg) +
               discount * propagated_value(next, propagated, net, look);
      });
}

int value_argmax(const GlobalAgentState& self,
                 std::span<const GlobalAgentState> others,
                 const NetworkParams& net, const ActionSpace& space,
                 const SimConfig& cfg, const LookaheadConfig& look) {
  const double discount =
      std::pow(cfg.gamma, look.propagation_dt * self.v_pref);
  return best_propagated_action(
      self, others, space, look.propagation_dt,
      [&](const GlobalAgentState& next,
          std::span<const GlobalAgentState> propagated) {
        return discount * propagated_value(next, propagated, net, look);
      });
}

}  // namespace gcdl
