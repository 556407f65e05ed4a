// Shared per-agent policy network: trajectory GRU, segment encoder over the
// sliding window, multi-head attention fusion into z, and the Q head.

#pragma once

#include "smaug/numerics/layers.hpp"
#include "smaug/numerics/ops.hpp"
#include "smaug/window/segments.hpp"

#include <limits>

namespace smaug::window {

struct AgentNetConfig {
  int obs_dim = 0;
  int n_actions = 0;
  int n_agents = 1;
  int hidden_dim = 64;
  int segment_hidden_dim = 64;
  int z_dim = 16;
  int n_heads = 4;
  int n_window = 5;
  bool per_window_segment_gru = false;
  double temperature = 1.0;

  int input_dim() const { return obs_dim + n_actions; }

  void validate() const {
    if (obs_dim < 1 || n_actions < 1 || n_agents < 1)
      throw ArgumentError("agent network: obs_dim, n_actions and n_agents must be positive");
    if (hidden_dim < 1 || segment_hidden_dim < 1 || z_dim < 1 || n_window < 1)
      throw ArgumentError("agent network: sizes must be positive");
    if (n_heads < 1 || z_dim % n_heads != 0)
      throw ArgumentError("agent network: z_dim " + std::to_string(z_dim) + " not divisible by " +
                          std::to_string(n_heads) + " heads");
    if (!(temperature > 0.0)) throw ArgumentError("agent network: temperature must be positive");
  }
};

template <typename T>
struct SubtaskRepresentation {
  Var<T> z;           // [N x z_dim]
  Matrix<T> weights;  // [N x heads * n_window], head-major
};

template <typename T>
struct AgentNetwork {
  using scalar_type = T;

  AgentNetConfig config;
  DenseLayer<T> traj_fc;
  GruCell<T> traj_gru;
  DenseLayer<T> seg_fc;
  std::vector<GruCell<T>> seg_grus;
  MultiHeadAttention<T> attention;
  DenseLayer<T> q_head;

  AgentNetwork() = default;
  explicit AgentNetwork(const AgentNetConfig& cfg) : config(cfg) {
    cfg.validate();
    const auto in = static_cast<std::size_t>(cfg.input_dim());
    const auto h = static_cast<std::size_t>(cfg.hidden_dim);
    const auto hs = static_cast<std::size_t>(cfg.segment_hidden_dim);
    const auto z = static_cast<std::size_t>(cfg.z_dim);
    traj_fc = DenseLayer<T>(in, h);
    traj_gru = GruCell<T>(h, h);
    seg_fc = DenseLayer<T>(in, hs);
    seg_grus.assign(cfg.per_window_segment_gru ? static_cast<std::size_t>(cfg.n_window) : 1,
                    GruCell<T>(hs, hs));
    attention = MultiHeadAttention<T>(h, hs, z, cfg.n_heads, static_cast<T>(cfg.temperature));
    q_head = DenseLayer<T>(h + z + static_cast<std::size_t>(cfg.n_agents),
                           static_cast<std::size_t>(cfg.n_actions));
  }

  void init(Rng& rng) {
    traj_fc.init(rng);
    traj_gru.init(rng);
    seg_fc.init(rng);
    for (auto& g : seg_grus) g.init(rng);
    attention.init(rng);
    q_head.init(rng);
  }

  GruCell<T>& segment_gru(int k) {
    return seg_grus.size() == 1 ? seg_grus.front() : seg_grus[static_cast<std::size_t>(k - 1)];
  }

  Var<T> zero_hidden(Tape<T>& tape, Eigen::Index rows) const {
    return tape.constant(Matrix<T>::Zero(rows, config.hidden_dim));
  }

  /// One trajectory GRU step on inputs x = [obs, prev action one-hot].
  Var<T> trajectory_step(Tape<T>& tape, const Var<T>& x, const Var<T>& h,
                         const Matrix<T>* mask = nullptr) {
    return traj_gru.step(tape, relu(traj_fc.forward(tape, x)), h, mask);
  }

  /// Embeds raw step inputs for segment encoding.
  Var<T> embed_positions(Tape<T>& tape, const Var<T>& positions) {
    return relu(seg_fc.forward(tape, positions));
  }

  /// Encodes every window size for each query row; returns one [N x Hs]
  /// representation per k. Padded steps leave the hidden state untouched.
  std::vector<Var<T>> encode_segments(Tape<T>& tape, const Var<T>& embedded, const SegmentIndex& index) {
    if (index.n_window() != config.n_window)
      throw DimensionError("encode_segments: index has " + std::to_string(index.n_window()) +
                           " window sizes, network expects " + std::to_string(config.n_window));
    const Eigen::Index pad_row = embedded.rows();
    const auto rows = static_cast<Eigen::Index>(index.rows());
    std::vector<Var<T>> gates(seg_grus.size());
    std::vector<Var<T>> reps;
    for (int k = 1; k <= config.n_window; ++k) {
      const auto g = seg_grus.size() == 1 ? std::size_t{0} : static_cast<std::size_t>(k - 1);
      if (!gates[g].valid()) {
        auto gi = seg_grus[g].input_gates(tape, embedded);
        gates[g] = concat_rows<T>({gi, tape.constant(Matrix<T>::Zero(1, gi.cols()))});
      }
      auto h = tape.constant(Matrix<T>::Zero(rows, config.segment_hidden_dim));
      for (const auto& step : index.steps[static_cast<std::size_t>(k - 1)]) {
        Matrix<T> mask(rows, 1);
        std::vector<Eigen::Index> take(step.size());
        bool any = false;
        for (std::size_t r = 0; r < step.size(); ++r) {
          const bool real = step[r] >= 0;
          mask(static_cast<Eigen::Index>(r), 0) = real ? T(1) : T(0);
          take[r] = real ? step[r] : pad_row;
          any = any || real;
        }
        if (!any) continue;
        h = seg_grus[g].step_from_gates(tape, take_rows(gates[g], std::move(take)), h, &mask);
      }
      reps.push_back(h);
    }
    return reps;
  }

  /// Attention fusion of the per-window representations, queried by h_traj.
  SubtaskRepresentation<T> recognize(Tape<T>& tape, const Var<T>& h_traj, const std::vector<Var<T>>& reps) {
    auto out = attention.forward(tape, h_traj, reps, reps);
    return {out.output, std::move(out.weights)};
  }

  /// Q values from [h_traj, z, agent one-hot].
  Var<T> q_values(Tape<T>& tape, const Var<T>& h_traj, const Var<T>& z, const Var<T>& agent_onehot) {
    return q_head.forward(tape, concat_cols<T>({h_traj, z, agent_onehot}));
  }

  template <typename F>
  void visit_parameters(F&& f) {
    auto sub = [&](const std::string& prefix, auto& net) {
      net.visit_parameters([&](const std::string& name, Tensor<T>& t) { f(prefix + name, t); });
    };
    sub("traj_fc.", traj_fc);
    sub("traj_gru.", traj_gru);
    sub("seg_fc.", seg_fc);
    for (std::size_t i = 0; i < seg_grus.size(); ++i) sub("seg_gru" + std::to_string(i) + ".", seg_grus[i]);
    sub("attention.", attention);
    sub("q_head.", q_head);
  }
};

/// Encodes a single segment with a GRU from the zero state, skipping padded steps.
template <typename T>
Var<T> encode_segment(Tape<T>& tape, GruCell<T>& gru, const Var<T>& embedded_steps,
                      const std::vector<std::uint8_t>& mask) {
  if (static_cast<std::size_t>(embedded_steps.rows()) != mask.size())
    throw DimensionError("encode_segment: " + std::to_string(embedded_steps.rows()) + " steps, " +
                         std::to_string(mask.size()) + " mask entries");
  auto h = tape.constant(Matrix<T>::Zero(1, static_cast<Eigen::Index>(gru.hidden_dim())));
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) h = gru.step(tape, slice_rows(embedded_steps, static_cast<Eigen::Index>(j), 1), h);
  return h;
}

/// Agent id one-hot rows: row r belongs to agent r % n_agents.
template <typename T>
Matrix<T> agent_onehot_rows(Eigen::Index rows, int n_agents) {
  Matrix<T> m = Matrix<T>::Zero(rows, n_agents);
  for (Eigen::Index r = 0; r < rows; ++r) m(r, r % n_agents) = T(1);
  return m;
}

/// Copies Q values and replaces unavailable actions with -inf.
template <typename T>
Matrix<T> mask_unavailable(const Matrix<T>& q, const std::vector<std::vector<std::uint8_t>>& masks) {
  if (static_cast<std::size_t>(q.rows()) != masks.size())
    throw DimensionError("mask_unavailable: " + std::to_string(q.rows()) + " rows, " +
                         std::to_string(masks.size()) + " masks");
  Matrix<T> out = q;
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const auto& m = masks[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(m.size()) != q.cols())
      throw DimensionError("mask_unavailable: mask width " + std::to_string(m.size()) + " vs " +
                           std::to_string(q.cols()) + " actions");
    for (Eigen::Index a = 0; a < q.cols(); ++a)
      if (!m[static_cast<std::size_t>(a)]) out(r, a) = -std::numeric_limits<T>::infinity();
  }
  return out;
}

/// Argmax of one row with the lowest index winning ties.
template <typename Row>
int greedy_action(const Row& q) {
  int best = -1;
  for (Eigen::Index a = 0; a < q.size(); ++a) {
    if (q(a) == -std::numeric_limits<typename Row::Scalar>::infinity()) continue;
    if (best < 0 || q(a) > q(best)) best = static_cast<int>(a);
  }
  if (best < 0) throw ArgumentError("greedy_action: no available action");
  return best;
}

/// Head-averaged attention weight over window sizes for one row.
template <typename T>
std::vector<double> mean_head_weights(const Matrix<T>& weights, Eigen::Index row, int n_heads) {
  const Eigen::Index K = weights.cols() / n_heads;
  std::vector<double> w(static_cast<std::size_t>(K), 0.0);
  for (int h = 0; h < n_heads; ++h)
    for (Eigen::Index k = 0; k < K; ++k) w[static_cast<std::size_t>(k)] += weights(row, h * K + k) / n_heads;
  return w;
}

}  // namespace smaug::window
