#pragma once

#include <span>

#include "gcdl/core.hpp"
#include "gcdl/env.hpp"
#include "gcdl/network.hpp"
#include "gcdl/policy_tag.hpp"

namespace gcdl {

/// Drives straight to the goal at full speed, turning as fast as the action
/// set allows. Returns the full-speed action with the smallest angular error
/// to the goal bearing.
int non_cooperative(const GlobalAgentState& self, const ActionSpace& space);

/// The zero-speed action with the smallest |heading change|.
int zero_velocity(const ActionSpace& space);

/// Argmax of the policy head on the ego-frame observation; ties break toward
/// the lowest action index.
int ga3c_inference(const GlobalAgentState& self,
                   std::span<const GlobalAgentState> others,
                   const NetworkParams& net, const ActionSpace& space,
                   OrderingStrategy ordering = OrderingStrategy::ClosestLast);

struct LookaheadConfig {
  double propagation_dt = 1.0;  // s
  OrderingStrategy ordering = OrderingStrategy::ClosestLast;
};

/// One-step lookahead on the value head: propagate self by each candidate
/// action and every other agent at constant velocity, then score
/// collision-penalty + gamma^(dt * v_pref) * V(propagated state).
int cadrl_lookahead(const GlobalAgentState& self,
                    std::span<const GlobalAgentState> others,
                    const NetworkParams& net, const ActionSpace& space,
                    const SimConfig& cfg, const LookaheadConfig& look = {});

/// Collision/near-miss component of the reward on a propagated state;
/// never includes the goal bonus.
double lookahead_collision_penalty(const GlobalAgentState& self,
                                   std::span<const GlobalAgentState> others,
                                   const SimConfig& cfg);

/// The greedy value-only choice (no collision penalty); used to expose how
/// the penalty changes the lookahead decision.
int value_argmax(const GlobalAgentState& self,
                 std::span<const GlobalAgentState> others,
                 const NetworkParams& net, const ActionSpace& space,
                 const SimConfig& cfg, const LookaheadConfig& look = {});

}  // namespace gcdl
