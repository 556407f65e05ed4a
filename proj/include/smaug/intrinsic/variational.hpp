// Variational classifiers behind the mutual-information intrinsic reward.
//
//   q_tau(tau | o, z): which agent's trajectory produced (o, z)
//   q_a(a | o):        which action was taken from o
//
// r_MI = beta1 * log q_tau(label | o, z) - beta2 * log q_a(a | o), with both
// log-probabilities clamped below at log(1e-8).

#pragma once

#include "smaug/numerics/layers.hpp"
#include "smaug/numerics/ops.hpp"

#include <cmath>
#include <type_traits>

namespace smaug::intrinsic {

inline const double kLogProbFloor = std::log(1e-8);

struct IntrinsicConfig {
  double beta1 = 1.0;
  double beta2 = 1.0;
  double beta_mi = 5e-2;
  int n_tau_classes = 1;

  void validate() const {
    for (double b : {beta1, beta2, beta_mi})
      if (!std::isfinite(b) || b < 0.0) throw ArgumentError("intrinsic weights must be finite and >= 0");
    if (n_tau_classes < 1) throw ArgumentError("n_tau_classes must be >= 1");
  }
};

template <typename T>
struct VariationalNets {
  using scalar_type = T;

  int obs_dim = 0;
  int z_dim = 0;
  int n_actions = 0;
  int n_tau_classes = 0;
  DenseLayer<T> tau_fc;
  DenseLayer<T> tau_out;
  DenseLayer<T> action_fc;
  DenseLayer<T> action_out;

  VariationalNets() = default;
  VariationalNets(int obs, int z, int actions, int tau_classes, int hidden = 64)
      : obs_dim(obs), z_dim(z), n_actions(actions), n_tau_classes(tau_classes),
        tau_fc(static_cast<std::size_t>(obs + z), static_cast<std::size_t>(hidden)),
        tau_out(static_cast<std::size_t>(hidden), static_cast<std::size_t>(tau_classes)),
        action_fc(static_cast<std::size_t>(obs), static_cast<std::size_t>(hidden)),
        action_out(static_cast<std::size_t>(hidden), static_cast<std::size_t>(actions)) {}

  void init(Rng& rng) {
    tau_fc.init(rng);
    tau_out.init(rng);
    action_fc.init(rng);
    action_out.init(rng);
  }

  /// Row-wise log q_tau(. | o, z).
  Var<T> tau_log_probs(Tape<T>& tape, const Var<T>& obs, const Var<T>& z) {
    return log_softmax(tau_out.forward(tape, relu(tau_fc.forward(tape, concat_cols<T>({obs, z})))));
  }

  /// Row-wise log q_a(. | o).
  Var<T> action_log_probs(Tape<T>& tape, const Var<T>& obs) {
    return log_softmax(action_out.forward(tape, relu(action_fc.forward(tape, obs))));
  }

  template <typename F>
  void visit_parameters(F&& f) {
    auto sub = [&](const std::string& prefix, auto& net) {
      net.visit_parameters([&](const std::string& name, Tensor<T>& t) { f(prefix + name, t); });
    };
    sub("tau_fc.", tau_fc);
    sub("tau_out.", tau_out);
    sub("action_fc.", action_fc);
    sub("action_out.", action_out);
  }
};

/// Label for q_tau: the agent index that produced the row.
inline int trajectory_class_label(int agent) { return agent; }

/// Labels for rows laid out with the agent index varying fastest.
inline std::vector<int> trajectory_class_labels(std::size_t rows, int n_agents) {
  std::vector<int> labels(rows);
  for (std::size_t r = 0; r < rows; ++r)
    labels[r] = trajectory_class_label(static_cast<int>(r % static_cast<std::size_t>(n_agents)));
  return labels;
}

/// Per-row r_MI from precomputed log-probability tables.
template <typename T>
std::vector<double> intrinsic_reward_from_log_probs(const Matrix<T>& tau_log_probs,
                                                    const Matrix<T>& action_log_probs,
                                                    const std::vector<int>& labels,
                                                    const std::vector<int>& actions, double beta1,
                                                    double beta2) {
  if (static_cast<std::size_t>(tau_log_probs.rows()) != labels.size() ||
      static_cast<std::size_t>(action_log_probs.rows()) != actions.size() || labels.size() != actions.size())
    throw DimensionError("intrinsic_reward: row counts differ");
  std::vector<double> r(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double lt = std::max(static_cast<double>(tau_log_probs(row, labels[i])), kLogProbFloor);
    const double la = std::max(static_cast<double>(action_log_probs(row, actions[i])), kLogProbFloor);
    r[i] = beta1 * lt - beta2 * la;
  }
  return r;
}

/// Per-row r_MI for observation rows, subtask rows, labels and taken actions.
template <typename T>
std::vector<double> intrinsic_reward(VariationalNets<T>& nets, const std::type_identity_t<Matrix<T>>& obs,
                                     const std::type_identity_t<Matrix<T>>& z,
                                     const std::vector<int>& labels, const std::vector<int>& actions,
                                     double beta1, double beta2) {
  Tape<T> tape;
  auto o = tape.constant(obs);
  const auto lt = nets.tau_log_probs(tape, o, tape.constant(z));
  const auto la = nets.action_log_probs(tape, o);
  return intrinsic_reward_from_log_probs(lt.value(), la.value(), labels, actions, beta1, beta2);
}

template <typename T>
struct VariationalLoss {
  Var<T> loss;
  double tau_accuracy = 0.0;
  double action_accuracy = 0.0;
};

namespace detail {

template <typename M>
double row_accuracy(const M& log_probs, const std::vector<int>& target) {
  if (target.empty()) return 0.0;
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < log_probs.rows(); ++r) {
    Eigen::Index best = 0;
    log_probs.row(r).maxCoeff(&best);
    hits += best == target[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(hits) / static_cast<double>(target.size());
}

}  // namespace detail

/// Mean cross-entropy of q_tau against labels plus mean cross-entropy of q_a
/// against taken actions. z may carry gradient into the window encoders.
template <typename T>
VariationalLoss<T> variational_loss(Tape<T>& tape, VariationalNets<T>& nets, const Var<T>& obs,
                                    const Var<T>& z, const std::vector<int>& labels,
                                    const std::vector<int>& actions) {
  if (labels.size() != static_cast<std::size_t>(obs.rows()) || actions.size() != labels.size())
    throw DimensionError("variational_loss: " + std::to_string(obs.rows()) + " rows, " +
                         std::to_string(labels.size()) + " labels, " + std::to_string(actions.size()) +
                         " actions");
  const auto lt = nets.tau_log_probs(tape, obs, z);
  const auto la = nets.action_log_probs(tape, obs);
  const T n = static_cast<T>(labels.size());
  auto loss = scale(add(sum(pick(lt, labels)), sum(pick(la, actions))), T(-1) / n);
  return {loss, detail::row_accuracy(lt.value(), labels), detail::row_accuracy(la.value(), actions)};
}

}  // namespace smaug::intrinsic
