// Monotonic mixing of per-agent Q values, with weights generated by
// hypernetworks conditioned on the global state and the agents' subtask
// vectors.
//
//   hidden  = elu(qs . |W1(s)| + b1(s))
//   Q_total = hidden . |W2(s)| + V(s)

#pragma once

#include "smaug/numerics/layers.hpp"
#include "smaug/numerics/ops.hpp"

namespace smaug::mixer {

struct MixerConfig {
  int n_agents = 1;
  int state_dim = 0;
  int z_dim = 16;
  int mix_dim = 32;
  int hyper_hidden = 64;

  int input_dim() const { return state_dim + n_agents * z_dim; }

  void validate() const {
    if (n_agents < 1 || state_dim < 1 || z_dim < 0 || mix_dim < 1 || hyper_hidden < 1)
      throw ArgumentError("mixer: sizes must be positive");
  }
};

template <typename T>
struct MixingNet {
  using scalar_type = T;

  MixerConfig config;
  DenseLayer<T> w1_hidden, w1_out;
  DenseLayer<T> b1;
  DenseLayer<T> w2_hidden, w2_out;
  DenseLayer<T> v_hidden, v_out;

  MixingNet() = default;
  explicit MixingNet(const MixerConfig& cfg) : config(cfg) {
    cfg.validate();
    const auto in = static_cast<std::size_t>(cfg.input_dim());
    const auto hh = static_cast<std::size_t>(cfg.hyper_hidden);
    const auto m = static_cast<std::size_t>(cfg.mix_dim);
    w1_hidden = DenseLayer<T>(in, hh);
    w1_out = DenseLayer<T>(hh, static_cast<std::size_t>(cfg.n_agents) * m);
    b1 = DenseLayer<T>(in, m);
    w2_hidden = DenseLayer<T>(in, hh);
    w2_out = DenseLayer<T>(hh, m);
    v_hidden = DenseLayer<T>(in, m);
    v_out = DenseLayer<T>(m, 1);
  }

  void init(Rng& rng) {
    for (auto* l : {&w1_hidden, &w1_out, &b1, &w2_hidden, &w2_out, &v_hidden, &v_out}) l->init(rng);
  }

  /// Builds [state, z_1, ..., z_n] rows from [N x state] and [N*n x z] with
  /// agent index fastest in the z rows.
  Var<T> conditioning(const Var<T>& state, const Var<T>& z_rows) const {
    if (state.cols() != config.state_dim || z_rows.cols() != config.z_dim ||
        z_rows.rows() != state.rows() * config.n_agents)
      throw DimensionError("mixer conditioning: state " + dims_string(state.value()) + ", z " +
                           dims_string(z_rows.value()) + " for " + std::to_string(config.n_agents) + " agents");
    if (config.z_dim == 0) return state;
    return concat_cols<T>({state, reshape(z_rows, state.rows(), config.n_agents * config.z_dim)});
  }

  /// qs [N x n_agents], cond [N x input_dim] -> Q_total [N x 1].
  Var<T> mix(Tape<T>& tape, const Var<T>& qs, const Var<T>& cond) {
    if (qs.cols() != config.n_agents)
      throw DimensionError("mix: " + std::to_string(qs.cols()) + " agent Q columns, mixer built for " +
                           std::to_string(config.n_agents) + " agents");
    if (cond.cols() != config.input_dim() || cond.rows() != qs.rows())
      throw DimensionError("mix: conditioning " + dims_string(cond.value()) + " vs qs " + dims_string(qs.value()) +
                           ", expected width " + std::to_string(config.input_dim()));
    auto w1 = abs(w1_out.forward(tape, relu(w1_hidden.forward(tape, cond))));
    auto hidden = elu(add(row_bmm(qs, w1), b1.forward(tape, cond)));
    auto w2 = abs(w2_out.forward(tape, relu(w2_hidden.forward(tape, cond))));
    auto v = v_out.forward(tape, relu(v_hidden.forward(tape, cond)));
    return add(row_sum(mul(hidden, w2)), v);
  }

  template <typename F>
  void visit_parameters(F&& f) {
    auto sub = [&](const std::string& prefix, auto& net) {
      net.visit_parameters([&](const std::string& name, Tensor<T>& t) { f(prefix + name, t); });
    };
    sub("hyper_w1.0.", w1_hidden);
    sub("hyper_w1.1.", w1_out);
    sub("hyper_b1.", b1);
    sub("hyper_w2.0.", w2_hidden);
    sub("hyper_w2.1.", w2_out);
    sub("hyper_v.0.", v_hidden);
    sub("hyper_v.1.", v_out);
  }
};

/// y = r + beta_mi * r_mi + beta_f * r_f + gamma * (1 - terminated) * next_q.
template <typename T>
Matrix<T> td_targets(const Matrix<T>& reward, const Matrix<T>& r_mi, const Matrix<T>& r_f,
                     const Matrix<T>& terminated, const Matrix<T>& next_q, T gamma, T beta_mi, T beta_f) {
  for (const Matrix<T>* m : {&r_mi, &r_f, &terminated, &next_q})
    if (m->rows() != reward.rows() || m->cols() != reward.cols())
      throw DimensionError("td_targets: " + dims_string(*m) + " vs reward " + dims_string(reward));
  return (reward.array() + beta_mi * r_mi.array() + beta_f * r_f.array() +
          gamma * (T(1) - terminated.array()) * next_q.array())
      .matrix();
}

/// Masked mean squared error between live Q_total and fixed targets.
template <typename T>
Var<T> td_loss(Tape<T>& tape, const Var<T>& q_total, const Matrix<T>& targets, const Matrix<T>& mask) {
  if (q_total.rows() != targets.rows() || q_total.cols() != 1 || targets.cols() != 1 || mask.rows() != targets.rows() ||
      mask.cols() != 1)
    throw DimensionError("td_loss: q " + dims_string(q_total.value()) + ", targets " + dims_string(targets) +
                         ", mask " + dims_string(mask));
  const T valid = mask.sum();
  if (!(valid > T(0))) throw ArgumentError("td_loss: no valid steps in batch");
  auto err = mul(sub(q_total, tape.constant(targets)), tape.constant(mask));
  return scale(sum(square(err)), T(1) / valid);
}

/// Hard copy of every parameter from live to target.
template <typename Net>
void sync_targets(Net& target, Net& live) {
  copy_parameters(target, live);
}

}  // namespace smaug::mixer
