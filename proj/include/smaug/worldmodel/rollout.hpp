// Imagined rollout interleaving the world model with a greedy policy.
//
// Rows are agents of one or more environments, grouped with the agent index
// fastest (row = env * n_agents + agent). The policy owns a private copy of
// whatever recurrent state it needs; the rollout never touches live state.

#pragma once

#include "smaug/worldmodel/inference_net.hpp"

#include <concepts>

namespace smaug::worldmodel {

/// act(obs) returns one action per row for the latest (real or predicted)
/// observation; extend(next_obs, actions) appends a predicted step.
template <typename P, typename T>
concept RolloutPolicy = requires(P p, const Matrix<T>& obs, const std::vector<int>& actions) {
  { p.act(obs) } -> std::convertible_to<std::vector<int>>;
  p.extend(obs, actions);
};

template <typename T>
struct RolloutResult {
  std::vector<Matrix<T>> predicted_obs;       // [m] -> [rows x obs_dim], o^{t+m+1}
  std::vector<std::vector<int>> actions;      // [m] -> a^{t+m} per row
  std::vector<std::vector<double>> rewards;   // [m] -> per environment, mean over its agents
  std::vector<double> future_rewards;         // per environment
};

template <typename T, typename Policy>
  requires RolloutPolicy<Policy, T>
RolloutResult<T> rollout(InferenceNet<T>& net, Policy& policy, const std::type_identity_t<Matrix<T>>& obs,
                         int n_agents, int n_f_step, double gamma) {
  if (n_f_step < 0) throw ArgumentError("rollout: n_f_step must be >= 0");
  if (n_agents < 1 || obs.rows() % n_agents != 0)
    throw DimensionError("rollout: " + std::to_string(obs.rows()) + " rows not divisible by " +
                         std::to_string(n_agents) + " agents");
  const auto n_envs = static_cast<std::size_t>(obs.rows() / n_agents);
  RolloutResult<T> out;
  out.future_rewards.assign(n_envs, 0.0);
  Matrix<T> current = obs;
  for (int m = 0; m < n_f_step; ++m) {
    std::vector<int> actions = policy.act(current);
    auto pred = predict_step(net, current, actions);
    std::vector<double> team(n_envs, 0.0);
    for (std::size_t r = 0; r < actions.size(); ++r)
      team[r / static_cast<std::size_t>(n_agents)] += static_cast<double>(pred.reward[r]) / n_agents;
    policy.extend(pred.next_obs, actions);
    out.actions.push_back(std::move(actions));
    out.rewards.push_back(team);
    current = pred.next_obs;
    out.predicted_obs.push_back(std::move(pred.next_obs));
  }
  for (std::size_t e = 0; e < n_envs; ++e) {
    std::vector<double> seq;
    for (const auto& step : out.rewards) seq.push_back(step[e]);
    out.future_rewards[e] = future_reward(seq, gamma);
  }
  return out;
}

}  // namespace smaug::worldmodel
