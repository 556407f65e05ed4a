// Episode collection in lockstep across environment instances, and greedy
// evaluation built on it.

#pragma once

#include "smaug/env/vector_env.hpp"
#include "smaug/trainer/episode.hpp"
#include "smaug/trainer/model.hpp"
#include "smaug/worldmodel/rollout.hpp"

#include <cmath>
#include <random>

namespace smaug::trainer {

struct CollectOptions {
  double epsilon = 0.0;
  int n_f_step = 0;  // imagined steps per real step; 0 disables the rollout
  double gamma = 0.99;
  bool intrinsic = false;
  double beta1 = 1.0;
  double beta2 = 1.0;
  bool record_attention = false;
};

namespace detail {

/// Greedy rollout policy over an Actor. The first imagined action respects
/// the real availability masks; later ones range over every action.
template <typename T>
struct ImaginedPolicy {
  Actor<T>* actor;
  const std::vector<std::vector<std::uint8_t>>* masks;
  int n_actions;
  std::vector<std::vector<Matrix<T>>> predicted;
  int step = 0;

  std::vector<int> act(const Matrix<T>&) {
    Tape<T> tape;
    const auto out = actor->evaluate(tape, predicted);
    const Matrix<T> q = step == 0 ? window::mask_unavailable(out.q.value(), *masks) : out.q.value();
    std::vector<int> a(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index r = 0; r < q.rows(); ++r) a[static_cast<std::size_t>(r)] = window::greedy_action(q.row(r));
    return a;
  }

  void extend(const Matrix<T>& next_obs, const std::vector<int>& actions) {
    for (Eigen::Index r = 0; r < next_obs.rows(); ++r) {
      Matrix<T> x = Matrix<T>::Zero(1, next_obs.cols() + n_actions);
      x.leftCols(next_obs.cols()) = next_obs.row(r);
      x(0, next_obs.cols() + actions[static_cast<std::size_t>(r)]) = T(1);
      predicted[static_cast<std::size_t>(r)].push_back(std::move(x));
    }
    ++step;
  }
};

inline void append_floats(std::vector<float>& dst, const std::vector<float>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace detail

/// Runs one episode in each of the first `count` instances of `envs`.
/// Finished instances idle until every episode has ended.
template <typename T, typename Rng>
std::vector<EpisodeBatch> collect_episodes(SmaugModel<T>& model, env::VectorEnv& envs, std::size_t count,
                                           const std::vector<std::uint64_t>& seeds, const CollectOptions& opt,
                                           Rng& rng) {
  if (count == 0 || count > envs.size() || seeds.size() != count)
    throw ArgumentError("collect_episodes: " + std::to_string(count) + " episodes, " +
                        std::to_string(seeds.size()) + " seeds, " + std::to_string(envs.size()) + " instances");
  const auto& spec = envs.spec();
  const int n = spec.n_agents;
  const int nA = spec.n_actions;
  const int E = static_cast<int>(count);
  const int R = E * n;
  const int n_f = opt.n_f_step;
  const int W = model.n_window();
  const int heads = model.agent.config.n_heads;

  std::vector<EpisodeBatch> eps(count);
  std::vector<env::ResetResult> current(count);
  std::vector<std::uint8_t> stepping(count, 1), open(count, 1);
  for (int e = 0; e < E; ++e) {
    current[static_cast<std::size_t>(e)] = envs.at(static_cast<std::size_t>(e)).reset(seeds[static_cast<std::size_t>(e)]);
    auto& ep = eps[static_cast<std::size_t>(e)];
    ep.n_agents = n;
    ep.obs_dim = spec.obs_dim;
    ep.state_dim = spec.state_dim;
    ep.n_actions = nA;
    ep.z_dim = model.z_dim();
    ep.n_f = n_f;
    ep.episode_limit = spec.episode_limit;
  }

  Actor<T> actor(model, E);
  std::vector<int> prev(static_cast<std::size_t>(R), -1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  while (true) {
    bool any_open = false;
    for (auto o : open) any_open = any_open || o;
    if (!any_open) break;

    Matrix<T> obs(R, spec.obs_dim);
    std::vector<std::vector<std::uint8_t>> masks(static_cast<std::size_t>(R));
    for (int e = 0; e < E; ++e) {
      const auto& cur = current[static_cast<std::size_t>(e)];
      for (int i = 0; i < n; ++i) {
        const int r = e * n + i;
        for (int d = 0; d < spec.obs_dim; ++d)
          obs(r, d) = static_cast<T>(cur.observations[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)]);
        auto m = cur.available_actions[static_cast<std::size_t>(i)];
        bool any = false;
        for (auto v : m) any = any || v;
        // idle or terminal rows may have no available action; they are never recorded
        if (!any || !open[static_cast<std::size_t>(e)]) m.assign(static_cast<std::size_t>(nA), 1);
        masks[static_cast<std::size_t>(r)] = std::move(m);
      }
    }
    actor.observe(obs, prev);

    detail::ImaginedPolicy<T> policy{&actor, &masks, nA, std::vector<std::vector<Matrix<T>>>(static_cast<std::size_t>(R)), 0};
    worldmodel::RolloutResult<T> ro;
    if (n_f > 0) ro = worldmodel::rollout(model.inference, policy, obs, n, n_f, opt.gamma);
    Tape<T> tape;
    const auto out = actor.evaluate(tape, policy.predicted);
    const Matrix<T> q = window::mask_unavailable(out.q.value(), masks);
    const Matrix<T>& zval = out.z.value();

    std::vector<std::vector<int>> joint(count);
    for (int e = 0; e < E; ++e) {
      const auto ue = static_cast<std::size_t>(e);
      if (!open[ue]) continue;
      auto& ep = eps[ue];
      const auto& cur = current[ue];
      for (int i = 0; i < n; ++i) {
        const int r = e * n + i;
        detail::append_floats(ep.obs, cur.observations[static_cast<std::size_t>(i)]);
        const auto& m = cur.available_actions[static_cast<std::size_t>(i)];
        ep.avail.insert(ep.avail.end(), m.begin(), m.end());
        for (int d = 0; d < ep.z_dim; ++d) ep.z.push_back(static_cast<float>(zval(r, d)));
        if (opt.record_attention && out.weights.size() > 0)
          for (int c = 0; c < heads * W; ++c) ep.attention.push_back(static_cast<float>(out.weights(r, c)));
      }
      for (int m = 0; m < n_f; ++m)
        for (int i = 0; i < n; ++i) {
          const int r = e * n + i;
          for (int d = 0; d < spec.obs_dim; ++d)
            ep.pred_obs.push_back(static_cast<float>(ro.predicted_obs[static_cast<std::size_t>(m)](r, d)));
          ep.pred_actions.push_back(ro.actions[static_cast<std::size_t>(m)][static_cast<std::size_t>(r)]);
        }
      detail::append_floats(ep.state, cur.state);
      ep.goal.push_back(envs.at(ue).ground_truth_subtask());

      if (!stepping[ue]) {
        open[ue] = 0;
        ep.success = envs.at(ue).episode_success();
        continue;
      }
      auto& ja = joint[ue];
      for (int i = 0; i < n; ++i) {
        const int r = e * n + i;
        const auto& m = masks[static_cast<std::size_t>(r)];
        int a;
        if (opt.epsilon > 0.0 && unit(rng) < opt.epsilon) {
          std::vector<int> allowed;
          for (int k = 0; k < nA; ++k)
            if (m[static_cast<std::size_t>(k)]) allowed.push_back(k);
          a = allowed[std::uniform_int_distribution<std::size_t>(0, allowed.size() - 1)(rng)];
        } else {
          a = window::greedy_action(q.row(r));
        }
        ja.push_back(a);
      }
      ep.r_f.push_back(n_f > 0 ? static_cast<float>(ro.future_rewards[ue]) : 0.0f);
    }

    if (opt.intrinsic) {
      std::vector<Eigen::Index> rows;
      std::vector<int> labels, acts;
      for (int e = 0; e < E; ++e)
        if (open[static_cast<std::size_t>(e)] && stepping[static_cast<std::size_t>(e)])
          for (int i = 0; i < n; ++i) {
            rows.push_back(e * n + i);
            labels.push_back(intrinsic::trajectory_class_label(i));
            acts.push_back(joint[static_cast<std::size_t>(e)][static_cast<std::size_t>(i)]);
          }
      if (!rows.empty()) {
        Matrix<T> o(static_cast<Eigen::Index>(rows.size()), obs.cols());
        Matrix<T> zz(static_cast<Eigen::Index>(rows.size()), zval.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
          o.row(static_cast<Eigen::Index>(k)) = obs.row(rows[k]);
          zz.row(static_cast<Eigen::Index>(k)) = zval.row(rows[k]);
        }
        const auto r = intrinsic::intrinsic_reward(model.variational, o, zz, labels, acts, opt.beta1, opt.beta2);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          auto& ep = eps[static_cast<std::size_t>(rows[k] / n)];
          if (rows[k] % n == 0) ep.r_mi.push_back(0.0f);
          ep.r_mi.back() += static_cast<float>(r[k]);
        }
      }
    }

    for (int e = 0; e < E; ++e) {
      const auto ue = static_cast<std::size_t>(e);
      if (!open[ue] || !stepping[ue]) continue;
      auto& ep = eps[ue];
      if (!opt.intrinsic) ep.r_mi.push_back(0.0f);
      env::StepResult res;
      try {
        res = envs.at(ue).step(joint[ue]);
      } catch (const env::ContractViolation& err) {
        throw env::ContractViolation("episode " + std::to_string(e) + " step " + std::to_string(ep.length) + ": " +
                                     err.what());
      }
      ep.actions.insert(ep.actions.end(), joint[ue].begin(), joint[ue].end());
      ep.reward.push_back(static_cast<float>(res.reward));
      ep.terminated.push_back(res.terminated ? 1 : 0);
      ep.episode_return += res.reward;
      ++ep.length;
      for (int i = 0; i < n; ++i) prev[static_cast<std::size_t>(e * n + i)] = joint[ue][static_cast<std::size_t>(i)];
      current[ue].observations = std::move(res.next_observations);
      current[ue].state = std::move(res.global_state);
      current[ue].available_actions = std::move(res.available_actions);
      if (res.done()) stepping[ue] = 0;
    }
  }
  return eps;
}

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
  double std_return = 0.0;  // population standard deviation over episodes
  std::vector<double> returns;
};

inline EvalResult summarize_returns(const std::vector<double>& returns, std::size_t successes) {
  EvalResult r;
  r.returns = returns;
  if (returns.empty()) return r;
  const double N = static_cast<double>(returns.size());
  double total = 0.0;
  for (double v : returns) total += v;
  r.mean_return = total / N;
  double var = 0.0;
  for (double v : returns) var += (v - r.mean_return) * (v - r.mean_return);
  r.std_return = std::sqrt(var / N);
  r.success_rate = static_cast<double>(successes) / N;
  return r;
}

/// Evaluates any decentralized policy policy(observations, available) -> joint
/// action with the same seeds and statistics as the learned-model evaluation.
template <typename Policy>
EvalResult evaluate_policy(env::Environment& environment, int n_episodes, std::uint64_t seed_base, Policy&& policy) {
  if (n_episodes < 1) throw ArgumentError("evaluate: n_episodes must be >= 1");
  std::vector<double> returns;
  std::size_t successes = 0;
  for (int k = 0; k < n_episodes; ++k) {
    auto cur = environment.reset(seed_base + static_cast<std::uint64_t>(k));
    double ret = 0.0;
    while (true) {
      auto res = environment.step(policy(cur.observations, cur.available_actions));
      ret += res.reward;
      if (res.done()) break;
      cur.observations = std::move(res.next_observations);
      cur.available_actions = std::move(res.available_actions);
    }
    returns.push_back(ret);
    successes += environment.episode_success() ? 1 : 0;
  }
  return summarize_returns(returns, successes);
}

/// Greedy evaluation over n_episodes fresh episodes seeded seed_base, seed_base+1, ...
template <typename T>
EvalResult evaluate(SmaugModel<T>& model, env::VectorEnv& envs, int n_episodes, std::uint64_t seed_base,
                    int n_f_step, double gamma) {
  if (n_episodes < 1) throw ArgumentError("evaluate: n_episodes must be >= 1");
  std::vector<double> returns;
  std::size_t successes = 0;
  CollectOptions opt;
  opt.epsilon = 0.0;
  opt.n_f_step = n_f_step;
  opt.gamma = gamma;
  Rng unused(0);
  int done = 0;
  while (done < n_episodes) {
    const auto count = static_cast<std::size_t>(std::min<int>(n_episodes - done, static_cast<int>(envs.size())));
    std::vector<std::uint64_t> seeds;
    for (std::size_t k = 0; k < count; ++k) seeds.push_back(seed_base + static_cast<std::uint64_t>(done) + k);
    for (const auto& ep : collect_episodes(model, envs, count, seeds, opt, unused)) {
      returns.push_back(ep.episode_return);
      successes += ep.success ? 1 : 0;
    }
    done += static_cast<int>(count);
  }
  return summarize_returns(returns, successes);
}

}  // namespace smaug::trainer
