// One-step world model: a shared encoder over (o, a one-hot) feeding an
// observation decoder and a team-reward decoder.

#pragma once

#include "smaug/numerics/layers.hpp"
#include "smaug/numerics/ops.hpp"

#include <type_traits>

namespace smaug::worldmodel {

struct InferenceNetConfig {
  int obs_dim = 0;
  int n_actions = 0;
  int hidden_dim = 64;
  int embed_dim = 32;

  void validate() const {
    if (obs_dim < 1 || n_actions < 1 || hidden_dim < 1 || embed_dim < 1)
      throw ArgumentError("inference net: all sizes must be positive");
  }
};

template <typename T>
struct Prediction {
  Var<T> next_obs;  // [N x obs_dim]
  Var<T> reward;    // [N x 1]
};

template <typename T>
struct InferenceNet {
  using scalar_type = T;

  InferenceNetConfig config;
  DenseLayer<T> enc1, enc2;
  DenseLayer<T> obs_dec1, obs_dec2;
  DenseLayer<T> rew_dec1, rew_dec2;

  InferenceNet() = default;
  explicit InferenceNet(const InferenceNetConfig& cfg) : config(cfg) {
    cfg.validate();
    const auto in = static_cast<std::size_t>(cfg.obs_dim + cfg.n_actions);
    const auto h = static_cast<std::size_t>(cfg.hidden_dim);
    const auto e = static_cast<std::size_t>(cfg.embed_dim);
    enc1 = DenseLayer<T>(in, h);
    enc2 = DenseLayer<T>(h, e);
    obs_dec1 = DenseLayer<T>(e, h);
    obs_dec2 = DenseLayer<T>(h, static_cast<std::size_t>(cfg.obs_dim));
    rew_dec1 = DenseLayer<T>(e, h);
    rew_dec2 = DenseLayer<T>(h, 1);
  }

  void init(Rng& rng) {
    for (auto* l : {&enc1, &enc2, &obs_dec1, &obs_dec2, &rew_dec1, &rew_dec2}) l->init(rng);
  }

  /// Builds [o, one_hot(a)] rows.
  Matrix<T> encode_inputs(const Matrix<T>& obs, const std::vector<int>& actions) const {
    if (obs.cols() != config.obs_dim || static_cast<std::size_t>(obs.rows()) != actions.size())
      throw DimensionError("inference net: observations " + dims_string(obs) + " with " +
                           std::to_string(actions.size()) + " actions, obs_dim " + std::to_string(config.obs_dim));
    Matrix<T> x = Matrix<T>::Zero(obs.rows(), config.obs_dim + config.n_actions);
    x.leftCols(config.obs_dim) = obs;
    for (Eigen::Index r = 0; r < obs.rows(); ++r) {
      const int a = actions[static_cast<std::size_t>(r)];
      if (a < 0 || a >= config.n_actions)
        throw ArgumentError("inference net: action " + std::to_string(a) + " out of range");
      x(r, config.obs_dim + a) = T(1);
    }
    return x;
  }

  Prediction<T> forward(Tape<T>& tape, const Var<T>& inputs) {
    auto e = relu(enc2.forward(tape, relu(enc1.forward(tape, inputs))));
    auto o = obs_dec2.forward(tape, relu(obs_dec1.forward(tape, e)));
    auto r = rew_dec2.forward(tape, relu(rew_dec1.forward(tape, e)));
    return {o, r};
  }

  template <typename F>
  void visit_parameters(F&& f) {
    auto sub = [&](const std::string& prefix, auto& net) {
      net.visit_parameters([&](const std::string& name, Tensor<T>& t) { f(prefix + name, t); });
    };
    sub("enc1.", enc1);
    sub("enc2.", enc2);
    sub("obs_dec1.", obs_dec1);
    sub("obs_dec2.", obs_dec2);
    sub("rew_dec1.", rew_dec1);
    sub("rew_dec2.", rew_dec2);
  }
};

template <typename T>
struct StepPrediction {
  Matrix<T> next_obs;
  std::vector<T> reward;
};

/// Deterministic decode of both heads for each (o_i, a_i) row.
template <typename T>
StepPrediction<T> predict_step(InferenceNet<T>& net, const std::type_identity_t<Matrix<T>>& obs,
                               const std::vector<int>& actions) {
  Tape<T> tape;
  const auto p = net.forward(tape, tape.constant(net.encode_inputs(obs, actions)));
  StepPrediction<T> out;
  out.next_obs = p.next_obs.value();
  out.reward.resize(actions.size());
  for (std::size_t r = 0; r < actions.size(); ++r) out.reward[r] = p.reward.value()(static_cast<Eigen::Index>(r), 0);
  return out;
}

/// sum_m gamma^m r_m
inline double future_reward(const std::vector<double>& rewards, double gamma) {
  double total = 0.0, discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

template <typename T>
struct InferenceLoss {
  Var<T> loss;
  double obs_mse = 0.0;
  double reward_mse = 0.0;
};

/// Mean over rows of beta_o * ||f_o(o, a) - o'|| + beta_r * |f_r(o, a) - r'|.
template <typename T>
InferenceLoss<T> inference_loss(Tape<T>& tape, InferenceNet<T>& net, const Matrix<T>& inputs,
                                const Matrix<T>& next_obs, const Matrix<T>& rewards, T beta_o, T beta_r) {
  if (next_obs.rows() != inputs.rows() || rewards.rows() != inputs.rows() || rewards.cols() != 1 ||
      next_obs.cols() != net.config.obs_dim)
    throw DimensionError("inference_loss: inputs " + dims_string(inputs) + ", next obs " + dims_string(next_obs) +
                         ", rewards " + dims_string(rewards));
  const auto p = net.forward(tape, tape.constant(inputs));
  auto obs_err = sub(p.next_obs, tape.constant(next_obs));
  auto rew_err = sub(p.reward, tape.constant(rewards));
  auto per_row = add(scale(row_norm(obs_err), beta_o), scale(row_norm(rew_err), beta_r));
  InferenceLoss<T> out;
  out.loss = mean(per_row);
  out.obs_mse = static_cast<double>(obs_err.value().squaredNorm()) / static_cast<double>(obs_err.value().size());
  out.reward_mse = static_cast<double>(rew_err.value().squaredNorm()) / static_cast<double>(rew_err.value().size());
  return out;
}

}  // namespace smaug::worldmodel
