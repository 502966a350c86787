#include "gcdl/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace gcdl {

namespace {

VectorXd sigmoid(const VectorXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

}  // namespace

GateDecomposition input_gate_decompose(const LstmParams& params,
                                       const Eigen::Matrix<double, 7, 1>& x,
                                       const VectorXd& h_prev) {
  if (!x.allFinite() || !h_prev.allFinite()) {
    throw std::invalid_argument("input_gate_decompose: non-finite input");
  }
  const int in_dim = params.input_dim();
  const auto w_s = params.w_input.leftCols(in_dim);
  const auto w_h = params.w_input.rightCols(params.hidden());

  const VectorXd from_state = w_s * x;
  const VectorXd from_hidden = w_h * h_prev;
  const VectorXd gate = sigmoid(from_state + from_hidden + params.b_input);

  const double dev_s = (gate - sigmoid(from_hidden + params.b_input)).norm();
  const double dev_h = (gate - sigmoid(from_state + params.b_input)).norm();
  const double dev_b = (gate - sigmoid(from_state + from_hidden)).norm();

  GateDecomposition d;
  d.l1_mean = gate.lpNorm<1>() / static_cast<double>(gate.size());
  const double denom = dev_s + dev_h + dev_b;
  if (denom == 0.0) {
    d.valid = false;
    return d;
  }
  const double k = d.l1_mean / denom;
  d.i_s = k * dev_s;
  d.i_h = k * dev_h;
  d.i_b = k * dev_b;
  return d;
}

std::vector<GateDecomposition> gate_trace(const NetworkParams& net,
                                          const ScenarioSpec& scenario,
                                          OrderingStrategy ordering) {
  const std::vector<GlobalAgentState> states = initial_states(scenario);
  if (states.empty()) return {};
  const GlobalAgentState& ego = states[0];
  std::vector<GlobalAgentState> others(states.begin() + 1, states.end());

  auto [self, neighbors] = to_ego_frame(ego, others);
  const auto ordered = order_neighbors(
      ordering, rotate(ego.vel, -ego_frame_angle(ego)), neighbors);

  ForwardTrace trace;
  lstm_encode(net.lstm, ordered, &trace);

  std::vector<GateDecomposition> out;
  out.reserve(trace.steps.size());
  for (std::size_t j = 0; j < trace.steps.size(); ++j) {
    const VectorXd h_prev = j > 0 ? trace.steps[j - 1].hidden
                                  : VectorXd::Zero(net.meta.hidden).eval();
    Eigen::Matrix<double, 7, 1> x = trace.steps[j].input;
    out.push_back(input_gate_decompose(net.lstm, x, h_prev));
  }
  return out;
}

std::string gate_trace_csv(const std::vector<GateTraceRow>& rows) {
  std::ostringstream os;
  os << "scenario_id,step_j,i_s,i_h,i_b,l1_mean\n";
  char buf[160];
  for (const GateTraceRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%.17g\n",
                  r.scenario_id, r.step, r.decomp.i_s, r.decomp.i_h,
                  r.decomp.i_b, r.decomp.l1_mean);
    os << buf;
  }
  return os.str();
}

std::vector<GateTraceRow> gate_trace_experiment(const NetworkParams& net,
                                                int n_scenes,
                                                std::uint64_t seed,
                                                OrderingStrategy ordering) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_agents(3, 8);
  std::vector<GateTraceRow> rows;
  for (int s = 0; s < n_scenes; ++s) {
    const ScenarioSpec spec = random_test_case(n_agents(rng), rng());
    const auto decomps = gate_trace(net, spec, ordering);
    for (std::size_t j = 0; j < decomps.size(); ++j) {
      rows.push_back({s, static_cast<int>(j), decomps[j]});
    }
  }
  return rows;
}

double approach_gate_tendency(const NetworkParams& net, int n_scenes,
                              std::uint64_t seed, OrderingStrategy ordering) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> n_agents(3, 8);
  int hits = 0, valid_scenes = 0;

  for (int s = 0; s < n_scenes; ++s) {
    ScenarioSpec spec = random_test_case(n_agents(rng), rng());
    std::vector<GlobalAgentState> states = initial_states(spec);
    const GlobalAgentState& ego = states[0];

    // Closest neighbor to the ego agent.
    int closest = 1;
    for (int i = 2; i < static_cast<int>(states.size()); ++i) {
      if ((states[i].pos - ego.pos).norm() <
          (states[closest].pos - ego.pos).norm()) {
        closest = i;
      }
    }
    const Vec2 toward = (ego.pos - states[closest].pos).normalized();

    auto final_i_s = [&](const Vec2& vel) {
      std::vector<GlobalAgentState> modified = states;
      modified[closest].vel = vel;
      std::vector<GlobalAgentState> others(modified.begin() + 1,
                                           modified.end());
      auto [self, neighbors] = to_ego_frame(modified[0], others);
      const auto ordered = order_neighbors(
          ordering, rotate(modified[0].vel, -ego_frame_angle(modified[0])),
          neighbors);
      ForwardTrace trace;
      lstm_encode(net.lstm, ordered, &trace);
      const std::size_t last = trace.steps.size() - 1;
      const VectorXd h_prev =
          last > 0 ? trace.steps[last - 1].hidden
                   : VectorXd::Zero(net.meta.hidden).eval();
      return input_gate_decompose(net.lstm, trace.steps[last].input, h_prev);
    };

    const double speed = states[closest].v_pref;
    const GateDecomposition approaching = final_i_s(speed * toward);
    const GateDecomposition receding = final_i_s(-speed * toward);
    if (!approaching.valid || !receding.valid) continue;
    ++valid_scenes;
    if (approaching.i_s > receding.i_s) ++hits;
  }
  return valid_scenes > 0 ? static_cast<double>(hits) / valid_scenes : 0.0;
}

OrderingExperimentResult ordering_experiment(
    const NetworkParams& init_net, const TrainerConfig& base,
    const std::filesystem::path& out_dir) {
  OrderingExperimentResult result;
  for (OrderingStrategy strategy :
       {OrderingStrategy::ClosestLast, OrderingStrategy::ClosestFirst,
        OrderingStrategy::TimeToCollision}) {
    TrainerConfig cfg = base;
    cfg.ordering = strategy;
    cfg.out_dir = out_dir / to_string(strategy);
    TrainResult run = trainer_loop(init_net, cfg);
    result.curves[strategy] = std::move(run.reward_curve);
  }
  return result;
}

}  // namespace gcdl
