#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcdl/core.hpp"

namespace gcdl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr int kHiddenSize = 64;
constexpr int kNeighborDim = 7;
constexpr int kSelfDim = 4;
constexpr int kLayerSize = 256;

/// LSTM cell over neighbor observations. Each weight matrix maps the
/// concatenated [neighbor 7-vector; hidden 64-vector] to the hidden size.
struct LstmParams {
  MatrixXd w_input, w_forget, w_output, w_cand;  // hidden x (in + hidden)
  VectorXd b_input, b_forget, b_output, b_cand;  // hidden

  int hidden() const { return static_cast<int>(b_input.size()); }
  int input_dim() const {
    return static_cast<int>(w_input.cols()) - hidden();
  }
};

/// Feedforward trunk and the two heads on top of [self; h_n].
struct MlpParams {
  MatrixXd w1;  // layer x (self + hidden)
  VectorXd b1;
  MatrixXd w2;  // layer x layer
  VectorXd b2;
  MatrixXd w_policy;  // actions x layer
  VectorXd b_policy;
  MatrixXd w_value;  // 1 x layer
  VectorXd b_value;  // 1
};

struct NetMeta {
  std::uint32_t version = 1;
  int hidden = kHiddenSize;
  int self_dim = kSelfDim;
  int neighbor_dim = kNeighborDim;
  int n_actions = kNumActions;
  double gamma = 0.97;
};

struct NetworkParams {
  NetMeta meta;
  LstmParams lstm;
  MlpParams mlp;
};

/// Xavier-uniform weights, zero biases except forget-gate bias = 1.
NetworkParams init_network(std::uint64_t seed, const NetMeta& meta = {});

struct LstmStepTrace {
  VectorXd input;  // the neighbor 7-vector fed at this step
  VectorXd gate_input, gate_forget, gate_output, cand;
  VectorXd cell, hidden;
};

struct ForwardTrace {
  std::vector<LstmStepTrace> steps;
  VectorXd h_final;
  VectorXd encoded;  // s_e = [self; h_n]
  VectorXd z1, a1, z2, a2;
  VectorXd logits, probs;
  double value = 0.0;
};

/// Runs the cell over the ordered neighbor sequence from zero initial
/// hidden/cell states. Empty sequence yields the zero vector.
VectorXd lstm_encode(const LstmParams& params,
                     std::span<const EgoNeighborState> ordered,
                     ForwardTrace* trace = nullptr);

ForwardTrace network_forward(const NetworkParams& net, const EgoSelfState& self,
                             std::span<const EgoNeighborState> ordered);

enum class OrderingStrategy { ClosestLast, ClosestFirst, TimeToCollision };

const char* to_string(OrderingStrategy s);
OrderingStrategy ordering_from_string(const std::string& s);

/// Smallest t >= 0 at which two constant-velocity discs touch, or +inf.
double time_to_collision(const Vec2& rel_pos, const Vec2& rel_vel,
                         double combined_radius);

/// `ego_vel` is the ego agent's velocity expressed in the ego frame; it only
/// matters for the time-to-collision strategy.
std::vector<EgoNeighborState> order_neighbors(
    OrderingStrategy strategy, const Vec2& ego_vel,
    std::span<const EgoNeighborState> neighbors);

struct Sample {
  EgoSelfState self;
  std::vector<EgoNeighborState> neighbors;  // already ordered
  int action = 0;
  double ret = 0.0;  // n-step discounted return target
};

struct A3cConfig {
  double beta = 1e-4;        // entropy coefficient
  double value_weight = 0.5;  // weight on the squared value error term
};

struct LossBreakdown {
  double total = 0.0;
  double value_term = 0.0;   // sum (R - V)^2
  double policy_term = 0.0;  // -sum [log pi(a) * adv + beta * H]
  double entropy = 0.0;      // sum H
};

/// Minimized loss: value_weight * sum (R-V)^2 - sum [log pi * (R-V) + beta H],
/// with the advantage held constant in the policy term.
LossBreakdown a3c_loss(const NetworkParams& net, std::span<const Sample> batch,
                       const A3cConfig& cfg);

struct GradientSet {
  LstmParams lstm;
  MlpParams mlp;

  static GradientSet zeros_like(const NetworkParams& net);
  void scale(double s);
  bool finite() const;
};

GradientSet backward(const NetworkParams& net, std::span<const Sample> batch,
                     const A3cConfig& cfg, LossBreakdown* loss_out = nullptr);

/// Supervised initialization target: one-hot expert action + value label.
struct SupervisedSample {
  EgoSelfState self;
  std::vector<EgoNeighborState> neighbors;
  int action = 0;
  double value = 0.0;
};

/// Cross-entropy on the policy head plus squared error on the value head.
double supervised_loss(const NetworkParams& net,
                       std::span<const SupervisedSample> batch);
GradientSet supervised_backward(const NetworkParams& net,
                                std::span<const SupervisedSample> batch,
                                double* loss_out = nullptr);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  GradientSet m, v;
  std::int64_t step = 0;
  AdamConfig cfg;

  static AdamState create(const NetworkParams& net, const AdamConfig& cfg = {});
};

/// Standard bias-corrected adaptive update; rejects non-finite gradients.
void adam_step(NetworkParams& net, const GradientSet& grads, AdamState& state,
               double learning_rate);

enum class CheckpointErrorKind { CorruptFile, VersionMismatch, ShapeMismatch, IoError };

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

// Binary checkpoint: magic "GCDL", u32 version, metadata block, then named
// tensors as (u32 name length, name, u32 rank, u64 dims, row-major f64),
// little-endian. Round-trips are bit-exact.
void save_checkpoint(const NetworkParams& net,
                     const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace gcdl
