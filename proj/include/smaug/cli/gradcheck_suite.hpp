// Finite-difference gradient checks over every network of a small model,
// driven through the same forward passes the learner uses.

#pragma once

#include "smaug/env/switching_goals.hpp"
#include "smaug/numerics/gradcheck.hpp"
#include "smaug/trainer/collect.hpp"
#include "smaug/trainer/learner.hpp"

#include <string>
#include <vector>

namespace smaug::cli {

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

struct GradCheckSuiteOptions {
  std::uint64_t seed = 7;
  std::size_t max_per_tensor = 0;  // 0 checks every element
  double tolerance = 1e-3;
};

inline std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& opt = {}) {
  using T = double;
  env::SwitchingGoalsConfig grid;
  grid.grid_size = 4;
  grid.n_agents = 2;
  grid.n_goal_sites = 2;
  grid.episode_limit = 5;
  grid.view_radius = 1;
  env::SwitchingGoalsEnv environment(grid);

  trainer::TrainConfig cfg;
  cfg.n_window = 3;
  cfg.n_f_step = 2;
  cfg.hidden_dim = 8;
  cfg.segment_hidden_dim = 6;
  cfg.z_dim = 4;
  cfg.n_heads = 2;
  cfg.mix_dim = 5;
  cfg.hyper_hidden = 6;
  cfg.variational_hidden = 7;
  cfg.inference_hidden = 6;
  cfg.inference_embed = 5;
  cfg.per_window_segment_gru = true;

  trainer::SmaugModel<T> model(environment.spec(), cfg);
  Rng rng(opt.seed);
  model.init(rng);

  env::VectorEnv envs(environment, 2);
  trainer::CollectOptions co;
  co.epsilon = 1.0;
  co.n_f_step = cfg.n_f_step;
  co.intrinsic = true;
  auto eps = trainer::collect_episodes(model, envs, 2, {opt.seed, opt.seed + 1}, co, rng);
  const auto batch = trainer::build_training_batch<T>({&eps[0], &eps[1]});
  const int B = batch.episodes, n = batch.n_agents, L = batch.max_length, rows = batch.rows();
  const Eigen::Index first_rows = static_cast<Eigen::Index>(L) * rows;
  std::uniform_real_distribution<T> unit(-1.0, 1.0);
  Matrix<T> targets(static_cast<Eigen::Index>(L) * B, 1);
  for (Eigen::Index k = 0; k < targets.rows(); ++k) targets(k, 0) = unit(rng);

  std::vector<Eigen::Index> idx;
  std::vector<int> labels, acts;
  for (int t = 0; t < L; ++t)
    for (int e = 0; e < B; ++e) {
      if (t >= batch.lengths[static_cast<std::size_t>(e)]) continue;
      for (int i = 0; i < n; ++i) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * rows + e * n + i;
        idx.push_back(row);
        labels.push_back(intrinsic::trajectory_class_label(i));
        acts.push_back(batch.actions[static_cast<std::size_t>(row)]);
      }
    }
  Matrix<T> obs(static_cast<Eigen::Index>(idx.size()), batch.obs.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) obs.row(static_cast<Eigen::Index>(k)) = batch.obs.row(idx[k]);

  auto policy_loss = [&](Tape<T>& tape) {
    const auto out = trainer::forward_sequences(tape, model, batch.seq);
    auto chosen = pick(slice_rows(out.q, 0, first_rows), batch.actions);
    auto cond = model.mixer.conditioning(tape.constant(batch.state.topRows(static_cast<Eigen::Index>(L) * B)),
                                         slice_rows(out.z, 0, first_rows));
    auto q_total = model.mixer.mix(tape, reshape(chosen, static_cast<Eigen::Index>(L) * B, n), cond);
    auto td = mixer::td_loss(tape, q_total, targets, batch.mask);
    auto z = take_rows(slice_rows(out.z, 0, first_rows), idx);
    return add(td, intrinsic::variational_loss(tape, model.variational, tape.constant(obs), z, labels, acts).loss);
  };

  Matrix<T> next_obs(obs.rows(), obs.cols()), rewards(obs.rows(), 1);
  for (Eigen::Index k = 0; k < obs.rows(); ++k) {
    next_obs.row(k) = obs.row((k + 1) % obs.rows());
    rewards(k, 0) = unit(rng);
  }
  const Matrix<T> wm_inputs = model.inference.encode_inputs(obs, acts);
  auto inference_loss = [&](Tape<T>& tape) {
    return worldmodel::inference_loss(tape, model.inference, wm_inputs, next_obs, rewards, T(1), T(0.5)).loss;
  };

  struct Group {
    std::string name;
    std::vector<std::string> prefixes;
    bool world_model;
  };
  const std::vector<Group> groups{
      {"segment_gru", {"agent.seg_fc.", "agent.seg_gru"}, false},
      {"trajectory_gru", {"agent.traj_fc.", "agent.traj_gru."}, false},
      {"attention_fusion", {"agent.attention."}, false},
      {"agent_q_head", {"agent.q_head."}, false},
      {"variational_trajectory_net", {"variational.tau_"}, false},
      {"variational_action_net", {"variational.action_"}, false},
      {"inference_encoder", {"inference.enc"}, true},
      {"inference_obs_decoder", {"inference.obs_dec"}, true},
      {"inference_reward_decoder", {"inference.rew_dec"}, true},
      {"mixing_hypernetworks", {"mixer.hyper_"}, false},
  };

  GradCheckOptions gopt;
  gopt.tolerance = opt.tolerance;
  gopt.max_per_tensor = opt.max_per_tensor;
  gopt.seed = opt.seed;
  std::vector<GradCheckCase> out;
  for (const auto& g : groups) {
    ParameterList<T> params;
    model.visit_parameters([&](const std::string& name, Tensor<T>& t) {
      for (const auto& p : g.prefixes)
        if (name.rfind(p, 0) == 0) {
          params.add(name, t);
          break;
        }
    });
    if (params.items.empty()) throw ArgumentError("gradcheck suite: no parameters match " + g.name);
    GradCheckReport report =
        g.world_model ? grad_check(params, inference_loss, gopt) : grad_check(params, policy_loss, gopt);
    out.push_back({g.name, report});
  }
  return out;
}

}  // namespace smaug::cli
