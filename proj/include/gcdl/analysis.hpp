#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gcdl/env.hpp"
#include "gcdl/network.hpp"
#include "gcdl/training.hpp"

namespace gcdl {

/// Attribution of one LSTM input-gate activation to the neighbor
/// observation, the previous hidden state, and the bias. The three
/// components sum to l1_mean (the mean gate magnitude) by construction.
struct GateDecomposition {
  double i_s = 0.0;
  double i_h = 0.0;
  double i_b = 0.0;
  double l1_mean = 0.0;
  bool valid = true;  // false when all leave-one-in deviations vanish
};

GateDecomposition input_gate_decompose(const LstmParams& params,
                                       const Eigen::Matrix<double, 7, 1>& x,
                                       const VectorXd& h_prev);

/// Decomposes the input gate at every neighbor step of the ego agent's
/// (agent 0) observation at the scenario's initial state.
std::vector<GateDecomposition> gate_trace(const NetworkParams& net,
                                          const ScenarioSpec& scenario,
                                          OrderingStrategy ordering);

struct GateTraceRow {
  int scenario_id = 0;
  int step = 0;
  GateDecomposition decomp;
};

std::string gate_trace_csv(const std::vector<GateTraceRow>& rows);

/// Runs gate traces over `n_scenes` random scenarios and writes the CSV.
std::vector<GateTraceRow> gate_trace_experiment(const NetworkParams& net,
                                                int n_scenes,
                                                std::uint64_t seed,
                                                OrderingStrategy ordering);

/// Fraction of random scenes where the final (closest) neighbor raises the
/// observation component of the gate when approaching versus receding.
double approach_gate_tendency(const NetworkParams& net, int n_scenes,
                              std::uint64_t seed,
                              OrderingStrategy ordering =
                                  OrderingStrategy::ClosestLast);

struct OrderingExperimentResult {
  std::map<OrderingStrategy,
           std::vector<std::pair<std::int64_t, double>>>
      curves;
};

/// Trains one policy per ordering strategy with otherwise identical seeds
/// and configs; writes one reward-curve CSV per strategy under out_dir.
OrderingExperimentResult ordering_experiment(
    const NetworkParams& init_net, const TrainerConfig& base,
    const std::filesystem::path& out_dir);

}  // namespace gcdl
