#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "gcdl/env.hpp"
#include "gcdl/policies.hpp"

namespace gcdl {

struct RolloutConfig {
  SimConfig sim;
  OrderingStrategy ordering = OrderingStrategy::ClosestLast;
  LookaheadConfig lookahead;
  // When true, learned-policy agents sample from the policy distribution
  // instead of taking the argmax.
  bool sample_actions = false;
  std::uint64_t sample_seed = 0;
};

/// Called once per agent per step with the agent's pre-step state, the chosen
/// action index, and the ego observation that produced it (ordered as fed to
/// the network; empty for scripted agents).
using StepObserver = std::function<void(
    int agent, int step, const EgoSelfState&,
    const std::vector<EgoNeighborState>&, int action_idx, double reward,
    bool terminal)>;

/// Runs one full episode. `net` may be null when no agent uses a learned
/// policy. Deterministic given the spec, config, and seed.
EpisodeLog run_episode(const ScenarioSpec& spec, const NetworkParams* net,
                       const RolloutConfig& cfg,
                       const StepObserver& observer = {});

}  // namespace gcdl
