#include "gcdl/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

namespace gcdl {

namespace {

VectorXd sigmoid(const VectorXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

VectorXd relu(const VectorXd& z) { return z.cwiseMax(0.0); }

VectorXd softmax(const VectorXd& logits) {
  const VectorXd shifted = logits.array() - logits.maxCoeff();
  VectorXd e = shifted.array().exp();
  return e / e.sum();
}

struct TensorRef {
  const char* name;
  MatrixXd* mat = nullptr;
  VectorXd* vec = nullptr;

  Eigen::Index rows() const { return mat ? mat->rows() : vec->size(); }
  Eigen::Index cols() const { return mat ? mat->cols() : 1; }
  Eigen::Index size() const { return mat ? mat->size() : vec->size(); }
  double* data() const { return mat ? mat->data() : vec->data(); }
};

std::vector<TensorRef> tensors(LstmParams& l, MlpParams& m) {
  return {
      {"lstm.w_input", &l.w_input},   {"lstm.w_forget", &l.w_forget},
      {"lstm.w_output", &l.w_output}, {"lstm.w_cand", &l.w_cand},
      {"lstm.b_input", nullptr, &l.b_input},
      {"lstm.b_forget", nullptr, &l.b_forget},
      {"lstm.b_output", nullptr, &l.b_output},
      {"lstm.b_cand", nullptr, &l.b_cand},
      {"mlp.w1", &m.w1},              {"mlp.b1", nullptr, &m.b1},
      {"mlp.w2", &m.w2},              {"mlp.b2", nullptr, &m.b2},
      {"mlp.w_policy", &m.w_policy},  {"mlp.b_policy", nullptr, &m.b_policy},
      {"mlp.w_value", &m.w_value},    {"mlp.b_value", nullptr, &m.b_value},
  };
}

void shape_params(LstmParams& l, MlpParams& m, const NetMeta& meta) {
  const int h = meta.hidden;
  const int in = meta.neighbor_dim + h;
  for (MatrixXd* w : {&l.w_input, &l.w_forget, &l.w_output, &l.w_cand}) {
    w->setZero(h, in);
  }
  for (VectorXd* b : {&l.b_input, &l.b_forget, &l.b_output, &l.b_cand}) {
    b->setZero(h);
  }
  m.w1.setZero(kLayerSize, meta.self_dim + h);
  m.b1.setZero(kLayerSize);
  m.w2.setZero(kLayerSize, kLayerSize);
  m.b2.setZero(kLayerSize);
  m.w_policy.setZero(meta.n_actions, kLayerSize);
  m.b_policy.setZero(meta.n_actions);
  m.w_value.setZero(1, kLayerSize);
  m.b_value.setZero(1);
}

}  // namespace

NetworkParams init_network(std::uint64_t seed, const NetMeta& meta) {
  NetworkParams net;
  net.meta = meta;
  shape_params(net.lstm, net.mlp, meta);

  std::mt19937_64 rng(seed);
  auto xavier = [&](MatrixXd& w) {
    const double bound = std::sqrt(6.0 / (w.cols() + w.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
  };
  xavier(net.lstm.w_input);
  xavier(net.lstm.w_forget);
  xavier(net.lstm.w_output);
  xavier(net.lstm.w_cand);
  xavier(net.mlp.w1);
  xavier(net.mlp.w2);
  xavier(net.mlp.w_policy);
  xavier(net.mlp.w_value);
  net.lstm.b_forget.setConstant(1.0);  // standard trainability aid
  return net;
}

VectorXd lstm_encode(const LstmParams& params,
                     std::span<const EgoNeighborState> ordered,
                     ForwardTrace* trace) {
  const int hidden = params.hidden();
  VectorXd h = VectorXd::Zero(hidden);
  VectorXd cell = VectorXd::Zero(hidden);

  for (const EgoNeighborState& n : ordered) {
    const Eigen::Matrix<double, 7, 1> x = n.vec();
    if (!x.allFinite()) {
      throw std::invalid_argument("lstm_encode: non-finite neighbor input");
    }
    VectorXd a(x.size() + hidden);
    a << x, h;
    LstmStepTrace step;
    step.input = x;
    step.gate_input = sigmoid(params.w_input * a + params.b_input);
    step.gate_forget = sigmoid(params.w_forget * a + params.b_forget);
    step.gate_output = sigmoid(params.w_output * a + params.b_output);
    step.cand = (params.w_cand * a + params.b_cand).array().tanh();
    cell = step.gate_forget.cwiseProduct(cell) +
           step.gate_input.cwiseProduct(step.cand);
    h = step.gate_output.cwiseProduct(cell.array().tanh().matrix());
    step.cell = cell;
    step.hidden = h;
    if (trace) trace->steps.push_back(std::move(step));
  }
  if (trace) trace->h_final = h;
  return h;
}

ForwardTrace network_forward(const NetworkParams& net, const EgoSelfState& self,
                             std::span<const EgoNeighborState> ordered) {
  ForwardTrace trace;
  const VectorXd h = lstm_encode(net.lstm, ordered, &trace);
  trace.h_final = h;

  VectorXd s_e(net.meta.self_dim + net.meta.hidden);
  s_e << self.vec(), h;
  trace.encoded = s_e;

  trace.z1 = net.mlp.w1 * s_e + net.mlp.b1;
  trace.a1 = relu(trace.z1);
  trace.z2 = net.mlp.w2 * trace.a1 + net.mlp.b2;
  trace.a2 = relu(trace.z2);
  trace.logits = net.mlp.w_policy * trace.a2 + net.mlp.b_policy;
  trace.probs = softmax(trace.logits);
  trace.value = (net.mlp.w_value * trace.a2)(0) + net.mlp.b_value(0);

  if (!trace.probs.allFinite() || !std::isfinite(trace.value)) {
    throw std::runtime_error("network_forward: non-finite output");
  }
  return trace;
}

const char* to_string(OrderingStrategy s) {
  switch (s) {
    case OrderingStrategy::ClosestLast:
      return "closest_last";
    case OrderingStrategy::ClosestFirst:
      return "closest_first";
    case OrderingStrategy::TimeToCollision:
      return "time_to_collision";
  }
  return "unknown";
}

OrderingStrategy ordering_from_string(const std::string& s) {
  if (s == "closest_last") return OrderingStrategy::ClosestLast;
  if (s == "closest_first") return OrderingStrategy::ClosestFirst;
  if (s == "time_to_collision") return OrderingStrategy::TimeToCollision;
  throw std::invalid_argument("unknown ordering strategy: " + s);
}

double time_to_collision(const Vec2& rel_pos, const Vec2& rel_vel,
                         double combined_radius) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double c = rel_pos.squaredNorm() - combined_radius * combined_radius;
  if (c <= 0.0) return 0.0;  // already overlapping
  const double a = rel_vel.squaredNorm();
  if (a == 0.0) return kInf;
  const double b = 2.0 * rel_pos.dot(rel_vel);
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  return t >= 0.0 ? t : kInf;
}

std::vector<EgoNeighborState> order_neighbors(
    OrderingStrategy strategy, const Vec2& ego_vel,
    std::span<const EgoNeighborState> neighbors) {
  std::vector<EgoNeighborState> out(neighbors.begin(), neighbors.end());
  switch (strategy) {
    case OrderingStrategy::ClosestLast:
      std::stable_sort(out.begin(), out.end(),
                       [](const EgoNeighborState& a, const EgoNeighborState& b) {
                         if (a.dist != b.dist) return a.dist > b.dist;
                         return a.pos.x() < b.pos.x();
                       });
      break;
    case OrderingStrategy::ClosestFirst:
      std::stable_sort(out.begin(), out.end(),
                       [](const EgoNeighborState& a, const EgoNeighborState& b) {
                         if (a.dist != b.dist) return a.dist < b.dist;
                         return a.pos.x() < b.pos.x();
                       });
      break;
    case OrderingStrategy::TimeToCollision: {
      std::vector<std::pair<double, EgoNeighborState>> keyed;
      keyed.reserve(out.size());
      for (const EgoNeighborState& n : out) {
        keyed.emplace_back(
            time_to_collision(n.pos, n.vel - ego_vel, n.combined_radius), n);
      }
      // Least urgent first: infinite TTC leads, then decreasing TTC;
      // closest-last and ego-frame x break ties.
      std::stable_sort(keyed.begin(), keyed.end(),
                       [](const auto& a, const auto& b) {
                         if (a.first != b.first) return a.first > b.first;
                         if (a.second.dist != b.second.dist)
                           return a.second.dist > b.second.dist;
                         return a.second.pos.x() < b.second.pos.x();
                       });
      out.clear();
      for (auto& [ttc, n] : keyed) out.push_back(std::move(n));
      break;
    }
  }
  return out;
}

GradientSet GradientSet::zeros_like(const NetworkParams& net) {
  GradientSet g;
  shape_params(g.lstm, g.mlp, net.meta);
  return g;
}

void GradientSet::scale(double s) {
  for (TensorRef& t : tensors(lstm, mlp)) {
    Eigen::Map<VectorXd>(t.data(), t.size()) *= s;
  }
}

bool GradientSet::finite() const {
  auto& self = const_cast<GradientSet&>(*this);
  for (TensorRef& t : tensors(self.lstm, self.mlp)) {
    if (!Eigen::Map<VectorXd>(t.data(), t.size()).allFinite()) return false;
  }
  return true;
}

namespace {

double entropy(const VectorXd& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs(i) > 0.0) h -= probs(i) * std::log(probs(i));
  }
  return h;
}

// Backpropagates head gradients (d loss / d logits, d loss / d value) through
// the trunk and every LSTM step, accumulating into `g`.
void backprop_from_heads(const NetworkParams& net, const ForwardTrace& tr,
                         const VectorXd& dlogits, double dvalue,
                         GradientSet& g) {
  g.mlp.w_policy += dlogits * tr.a2.transpose();
  g.mlp.b_policy += dlogits;
  g.mlp.w_value += dvalue * tr.a2.transpose();
  g.mlp.b_value(0) += dvalue;

  VectorXd da2 = net.mlp.w_policy.transpose() * dlogits +
                 net.mlp.w_value.transpose() * dvalue;
  VectorXd dz2 =
      da2.cwiseProduct((tr.z2.array() > 0.0).cast<double>().matrix());
  g.mlp.w2 += dz2 * tr.a1.transpose();
  g.mlp.b2 += dz2;

  VectorXd da1 = net.mlp.w2.transpose() * dz2;
  VectorXd dz1 =
      da1.cwiseProduct((tr.z1.array() > 0.0).cast<double>().matrix());
  g.mlp.w1 += dz1 * tr.encoded.transpose();
  g.mlp.b1 += dz1;

  const int hidden = net.meta.hidden;
  VectorXd dh = (net.mlp.w1.transpose() * dz1).tail(hidden);
  VectorXd dcell = VectorXd::Zero(hidden);

  for (int j = static_cast<int>(tr.steps.size()) - 1; j >= 0; --j) {
    const LstmStepTrace& st = tr.steps[j];
    const VectorXd prev_cell =
        j > 0 ? tr.steps[j - 1].cell : VectorXd::Zero(hidden);
    const VectorXd prev_hidden =
        j > 0 ? tr.steps[j - 1].hidden : VectorXd::Zero(hidden);

    const VectorXd tanh_cell = st.cell.array().tanh();
    const VectorXd dout = dh.cwiseProduct(tanh_cell);
    dcell += dh.cwiseProduct(st.gate_output)
                 .cwiseProduct((1.0 - tanh_cell.array().square()).matrix());

    const VectorXd din = dcell.cwiseProduct(st.cand);
    const VectorXd dcand = dcell.cwiseProduct(st.gate_input);
    const VectorXd dforget = dcell.cwiseProduct(prev_cell);

    const VectorXd dz_in = din.cwiseProduct(st.gate_input)
                               .cwiseProduct((1.0 - st.gate_input.array()).matrix());
    const VectorXd dz_forget =
        dforget.cwiseProduct(st.gate_forget)
            .cwiseProduct((1.0 - st.gate_forget.array()).matrix());
    const VectorXd dz_out = dout.cwiseProduct(st.gate_output)
                                .cwiseProduct((1.0 - st.gate_output.array()).matrix());
    const VectorXd dz_cand =
        dcand.cwiseProduct((1.0 - st.cand.array().square()).matrix());

    VectorXd a(st.input.size() + hidden);
    a << st.input, prev_hidden;

    g.lstm.w_input += dz_in * a.transpose();
    g.lstm.b_input += dz_in;
    g.lstm.w_forget += dz_forget * a.transpose();
    g.lstm.b_forget += dz_forget;
    g.lstm.w_output += dz_out * a.transpose();
    g.lstm.b_output += dz_out;
    g.lstm.w_cand += dz_cand * a.transpose();
    g.lstm.b_cand += dz_cand;

    const VectorXd da = net.lstm.w_input.transpose() * dz_in +
                        net.lstm.w_forget.transpose() * dz_forget +
                        net.lstm.w_output.transpose() * dz_out +
                        net.lstm.w_cand.transpose() * dz_cand;
    dh = da.tail(hidden);
    dcell = dcell.cwiseProduct(st.gate_forget);
  }
}

void check_action(const NetworkParams& net, int action) {
  if (action < 0 || action >= net.meta.n_actions) {
    throw std::invalid_argument("action index out of range");
  }
}

}  // namespace

LossBreakdown a3c_loss(const NetworkParams& net, std::span<const Sample> batch,
                       const A3cConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("a3c_loss: empty batch");
  LossBreakdown out;
  for (const Sample& s : batch) {
    check_action(net, s.action);
    const ForwardTrace tr = network_forward(net, s.self, s.neighbors);
    const double adv = s.ret - tr.value;
    const double h = entropy(tr.probs);
    out.value_term += adv * adv;
    out.policy_term -= std::log(tr.probs(s.action)) * adv + cfg.beta * h;
    out.entropy += h;
  }
  out.total = cfg.value_weight * out.value_term + out.policy_term;
  return out;
}

GradientSet backward(const NetworkParams& net, std::span<const Sample> batch,
                     const A3cConfig& cfg, LossBreakdown* loss_out) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");
  GradientSet g = GradientSet::zeros_like(net);
  LossBreakdown loss;

  for (const Sample& s : batch) {
    check_action(net, s.action);
    const ForwardTrace tr = network_forward(net, s.self, s.neighbors);
    const double adv = s.ret - tr.value;  // constant in the policy term
    const double h = entropy(tr.probs);
    loss.value_term += adv * adv;
    loss.policy_term -= std::log(tr.probs(s.action)) * adv + cfg.beta * h;
    loss.entropy += h;

    VectorXd dlogits = adv * tr.probs;
    dlogits(s.action) -= adv;
    dlogits += cfg.beta *
               tr.probs.cwiseProduct((tr.probs.array().log() + h).matrix());
    const double dvalue = -2.0 * cfg.value_weight * adv;
    backprop_from_heads(net, tr, dlogits, dvalue, g);
  }
  loss.total = cfg.value_weight * loss.value_term + loss.policy_term;
  if (loss_out) *loss_out = loss;
  return g;
}

double supervised_loss(const NetworkParams& net,
                       std::span<const SupervisedSample> batch) {
  double total = 0.0;
  for (const SupervisedSample& s : batch) {
    check_action(net, s.action);
    const ForwardTrace tr = network_forward(net, s.self, s.neighbors);
    const double dv = tr.value - s.value;
    total += dv * dv - std::log(tr.probs(s.action));
  }
  return total;
}

GradientSet supervised_backward(const NetworkParams& net,
                                std::span<const SupervisedSample> batch,
                                double* loss_out) {
  GradientSet g = GradientSet::zeros_like(net);
  double total = 0.0;
  for (const SupervisedSample& s : batch) {
    check_action(net, s.action);
    const ForwardTrace tr = network_forward(net, s.self, s.neighbors);
    const double dv = tr.value - s.value;
    total += dv * dv - std::log(tr.probs(s.action));

    VectorXd dlogits = tr.probs;
    dlogits(s.action) -= 1.0;
    backprop_from_heads(net, tr, dlogits, 2.0 * dv, g);
  }
  if (loss_out) *loss_out = total;
  return g;
}

AdamState AdamState::create(const NetworkParams& net, const AdamConfig& cfg) {
  AdamState state;
  state.m = GradientSet::zeros_like(net);
  state.v = GradientSet::zeros_like(net);
  state.cfg = cfg;
  return state;
}

void adam_step(NetworkParams& net, const GradientSet& grads, AdamState& state,
               double learning_rate) {
  if (!grads.finite()) {
    throw std::invalid_argument("adam_step: non-finite gradient");
  }
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  auto params = tensors(net.lstm, net.mlp);
  auto& gmut = const_cast<GradientSet&>(grads);
  auto gs = tensors(gmut.lstm, gmut.mlp);
  auto ms = tensors(state.m.lstm, state.m.mlp);
  auto vs = tensors(state.v.lstm, state.v.mlp);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Eigen::Map<Eigen::ArrayXd> p(params[i].data(), params[i].size());
    Eigen::Map<Eigen::ArrayXd> grad(gs[i].data(), gs[i].size());
    Eigen::Map<Eigen::ArrayXd> m(ms[i].data(), ms[i].size());
    Eigen::Map<Eigen::ArrayXd> v(vs[i].data(), vs[i].size());
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.square();
    p -= learning_rate * (m / corr1) / ((v / corr2).sqrt() + state.cfg.epsilon);
  }
}

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError(CheckpointErrorKind::CorruptFile, "truncated checkpoint");
  return value;
}

constexpr char kMagic[4] = {'G', 'C', 'D', 'L'};

}  // namespace

void save_checkpoint(const NetworkParams& net,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CheckpointError(CheckpointErrorKind::IoError,
                          "cannot write checkpoint: " + path.string());
  }
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, net.meta.version);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.meta.hidden));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.meta.self_dim));
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(net.meta.neighbor_dim));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.meta.n_actions));
  write_pod<double>(out, net.meta.gamma);

  auto& mut = const_cast<NetworkParams&>(net);
  auto refs = tensors(mut.lstm, mut.mlp);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(refs.size()));
  for (const TensorRef& t : refs) {
    const std::uint32_t name_len =
        static_cast<std::uint32_t>(std::strlen(t.name));
    write_pod(out, name_len);
    out.write(t.name, name_len);
    const std::uint32_t rank = t.mat ? 2 : 1;
    write_pod(out, rank);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    if (t.mat) write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    if (t.mat) {
      for (Eigen::Index r = 0; r < t.mat->rows(); ++r) {
        for (Eigen::Index c = 0; c < t.mat->cols(); ++c) {
          write_pod<double>(out, (*t.mat)(r, c));
        }
      }
    } else {
      out.write(reinterpret_cast<const char*>(t.vec->data()),
                t.vec->size() * sizeof(double));
    }
  }
  if (!out) {
    throw CheckpointError(CheckpointErrorKind::IoError,
                          "write failed: " + path.string());
  }
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointErrorKind::IoError,
                          "cannot open checkpoint: " + path.string());
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorKind::CorruptFile, "bad magic bytes");
  }
  NetworkParams net;
  net.meta.version = read_pod<std::uint32_t>(in);
  if (net.meta.version != 1) {
    throw CheckpointError(CheckpointErrorKind::VersionMismatch,
                          "unsupported checkpoint version");
  }
  net.meta.hidden = static_cast<int>(read_pod<std::uint32_t>(in));
  net.meta.self_dim = static_cast<int>(read_pod<std::uint32_t>(in));
  net.meta.neighbor_dim = static_cast<int>(read_pod<std::uint32_t>(in));
  net.meta.n_actions = static_cast<int>(read_pod<std::uint32_t>(in));
  net.meta.gamma = read_pod<double>(in);
  if (net.meta.hidden != kHiddenSize || net.meta.self_dim != kSelfDim ||
      net.meta.neighbor_dim != kNeighborDim ||
      net.meta.n_actions != kNumActions) {
    throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                          "checkpoint dimensions do not match this build");
  }
  shape_params(net.lstm, net.mlp, net.meta);

  auto refs = tensors(net.lstm, net.mlp);
  const std::uint32_t count = read_pod<std::uint32_t>(in);
  if (count != refs.size()) {
    throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                          "unexpected tensor count");
  }
  for (const TensorRef& t : refs) {
    const std::uint32_t name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != t.name) {
      throw CheckpointError(CheckpointErrorKind::CorruptFile,
                            "unexpected tensor name: " + name);
    }
    const std::uint32_t rank = read_pod<std::uint32_t>(in);
    const std::uint32_t expected_rank = t.mat ? 2 : 1;
    if (rank != expected_rank) {
      throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                            "unexpected rank for " + name);
    }
    const auto rows = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));
    const Eigen::Index cols =
        t.mat ? static_cast<Eigen::Index>(read_pod<std::uint64_t>(in)) : 1;
    if (rows != t.rows() || cols != t.cols()) {
      throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                            "unexpected shape for " + name);
    }
    if (t.mat) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          (*t.mat)(r, c) = read_pod<double>(in);
        }
      }
    } else {
      in.read(reinterpret_cast<char*>(t.vec->data()),
              t.vec->size() * sizeof(double));
      if (!in) {
        throw CheckpointError(CheckpointErrorKind::CorruptFile,
                              "truncated checkpoint");
      }
    }
  }
  return net;
}

}  // namespace gcdl
