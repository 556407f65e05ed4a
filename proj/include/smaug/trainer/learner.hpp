// The learner: owns live and target networks, optimizers and buffers, and
// performs the three gradient updates of one training step.

#pragma once

#include "smaug/numerics/optim.hpp"
#include "smaug/trainer/collect.hpp"

#include <limits>
#include <optional>

namespace smaug::trainer {

/// Padded batch of episodes laid out for one training step.
template <typename T>
struct TrainingBatch {
  int episodes = 0;
  int max_length = 0;  // transitions in the longest episode
  int n_agents = 0;
  std::vector<int> lengths;
  SequenceInputs<T> seq;                          // slots = max_length + 1
  Matrix<T> state;                                // [slots * B x state_dim]
  std::vector<std::vector<std::uint8_t>> avail;   // [slots * rows]
  std::vector<int> actions;                       // [max_length * rows], 0 on padding
  Matrix<T> reward, r_mi, r_f, terminated, mask;  // [max_length * B x 1]
  Matrix<T> obs;                                  // [max_length * rows x obs_dim]

  int rows() const { return episodes * n_agents; }
};

template <typename T>
TrainingBatch<T> build_training_batch(const std::vector<const EpisodeBatch*>& eps) {
  if (eps.empty()) throw ArgumentError("training batch needs at least one episode");
  const auto& first = *eps.front();
  TrainingBatch<T> b;
  b.episodes = static_cast<int>(eps.size());
  b.n_agents = first.n_agents;
  for (const auto* ep : eps) {
    if (ep->n_agents != first.n_agents || ep->obs_dim != first.obs_dim || ep->n_f != first.n_f ||
        ep->n_actions != first.n_actions || ep->state_dim != first.state_dim)
      throw DimensionError("training batch mixes episodes of different shapes");
    b.lengths.push_back(ep->length);
    b.max_length = std::max(b.max_length, ep->length);
  }
  const int B = b.episodes, n = b.n_agents, L = b.max_length, S = L + 1, nA = first.n_actions;
  const int od = first.obs_dim, n_f = first.n_f, rows = B * n;
  const int in = od + nA;
  b.seq.slots = S;
  b.seq.rows = rows;
  b.seq.n_f = n_f;
  b.seq.real = Matrix<T>::Zero(static_cast<Eigen::Index>(S) * rows, in);
  b.seq.pred = Matrix<T>::Zero(static_cast<Eigen::Index>(S) * n_f * rows, in);
  b.state = Matrix<T>::Zero(static_cast<Eigen::Index>(S) * B, first.state_dim);
  b.avail.assign(static_cast<std::size_t>(S) * rows, std::vector<std::uint8_t>(static_cast<std::size_t>(nA), 0));
  b.actions.assign(static_cast<std::size_t>(L) * rows, 0);
  for (auto* m : {&b.reward, &b.r_mi, &b.r_f, &b.terminated, &b.mask})
    *m = Matrix<T>::Zero(static_cast<Eigen::Index>(L) * B, 1);
  b.obs = Matrix<T>::Zero(static_cast<Eigen::Index>(L) * rows, od);

  for (int e = 0; e < B; ++e) {
    const auto& ep = *eps[static_cast<std::size_t>(e)];
    for (int t = 0; t <= ep.length; ++t) {
      for (int d = 0; d < first.state_dim; ++d) b.state(t * B + e, d) = static_cast<T>(ep.state_at(t)[d]);
      for (int i = 0; i < n; ++i) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * rows + e * n + i;
        for (int d = 0; d < od; ++d) b.seq.real(row, d) = static_cast<T>(ep.obs_at(t, i)[d]);
        if (t > 0) b.seq.real(row, od + ep.action_at(t - 1, i)) = T(1);
        b.avail[static_cast<std::size_t>(row)].assign(ep.avail_at(t, i), ep.avail_at(t, i) + nA);
        for (int m = 0; m < n_f; ++m) {
          const Eigen::Index prow = (static_cast<Eigen::Index>(t) * n_f + m) * rows + e * n + i;
          for (int d = 0; d < od; ++d) b.seq.pred(prow, d) = static_cast<T>(ep.pred_obs_at(t, m, i)[d]);
          b.seq.pred(prow, od + ep.pred_action_at(t, m, i)) = T(1);
        }
        if (t < ep.length) {
          b.actions[static_cast<std::size_t>(row)] = ep.action_at(t, i);
          for (int d = 0; d < od; ++d) b.obs(row, d) = static_cast<T>(ep.obs_at(t, i)[d]);
        }
      }
      if (t < ep.length) {
        const Eigen::Index k = static_cast<Eigen::Index>(t) * B + e;
        const auto ut = static_cast<std::size_t>(t);
        b.reward(k, 0) = static_cast<T>(ep.reward[ut]);
        b.r_mi(k, 0) = static_cast<T>(ep.r_mi[ut]);
        b.r_f(k, 0) = static_cast<T>(ep.r_f[ut]);
        b.terminated(k, 0) = ep.terminated[ut] ? T(1) : T(0);
        b.mask(k, 0) = T(1);
      }
    }
  }
  return b;
}

struct TrainStats {
  double td_loss = 0.0;
  double variational_loss = 0.0;
  double inference_loss = 0.0;
  double grad_norm = 0.0;
  double q_taken_mean = 0.0;
  double target_mean = 0.0;
  double r_mi_mean = 0.0;
  double r_f_mean = 0.0;
  double tau_accuracy = 0.0;
  double action_accuracy = 0.0;
  double obs_mse = 0.0;
  double reward_mse = 0.0;
};

struct RoundResult {
  std::size_t episodes = 0;
  long long env_steps = 0;
  double mean_return = 0.0;
};

/// First evaluation episode seed for a run seed; episode k uses base + k.
inline std::uint64_t eval_seed_base(std::uint64_t seed) { return env::next_seed(seed ^ 0xE7A1ull); }

template <typename T = float>
class Learner {
 public:
  Learner(const env::Environment& prototype, const TrainConfig& cfg)
      : cfg_(validated(cfg)),
        envs_(prototype, static_cast<std::size_t>(cfg.n_parallel_envs)),
        eval_envs_(prototype, static_cast<std::size_t>(cfg.n_parallel_envs)),
        model_(prototype.spec(), cfg),
        target_(prototype.spec(), cfg),
        replay_(static_cast<std::size_t>(cfg.buffer_capacity)),
        transitions_(static_cast<std::size_t>(cfg.inference_buffer_capacity), prototype.spec().obs_dim),
        schedule_{cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_anneal_steps},
        act_rng_(env::next_seed(cfg.seed ^ 0xA11CEull)),
        sample_rng_(env::next_seed(cfg.seed ^ 0x5A3B1Eull)),
        env_seed_rng_(env::next_seed(cfg.seed ^ 0xE4F5EEDull)) {
    Rng init_rng(cfg.seed);
    model_.init(init_rng);
    copy_parameters(target_, model_);
    policy_params_.add_all("agent.", model_.agent);
    policy_params_.add_all("mixer.", model_.mixer);
    variational_params_.add_all("variational.", model_.variational);
    inference_params_.add_all("inference.", model_.inference);
    for (auto* opt : {&policy_opt_, &variational_opt_, &inference_opt_}) {
      opt->learning_rate = static_cast<T>(cfg.learning_rate);
      opt->alpha = static_cast<T>(cfg.rms_alpha);
      opt->epsilon = static_cast<T>(cfg.rms_epsilon);
    }
  }

  Learner(const Learner&) = delete;
  Learner& operator=(const Learner&) = delete;

  const TrainConfig& config() const { return cfg_; }
  SmaugModel<T>& model() { return model_; }
  SmaugModel<T>& target() { return target_; }
  ReplayBuffer& replay() { return replay_; }
  TransitionBuffer& transitions() { return transitions_; }
  long long env_steps() const { return env_steps_; }
  long long episodes() const { return episodes_; }
  long long train_steps() const { return train_steps_; }
  double epsilon() const { return schedule_.at(static_cast<double>(env_steps_)); }
  std::uint64_t eval_seed_base() const { return trainer::eval_seed_base(cfg_.seed); }

  CollectOptions collect_options(double epsilon) const {
    CollectOptions o;
    o.epsilon = epsilon;
    o.n_f_step = cfg_.rollout_steps();
    o.gamma = cfg_.gamma;
    o.intrinsic = cfg_.intrinsic_enabled();
    o.beta1 = cfg_.beta1;
    o.beta2 = cfg_.beta2;
    return o;
  }

  /// Collects one episode per environment instance with the current epsilon,
  /// stores them, and refreshes the target networks when due.
  RoundResult collect_round() {
    std::vector<std::uint64_t> seeds;
    for (std::size_t e = 0; e < envs_.size(); ++e) seeds.push_back(env_seed_rng_());
    auto eps = collect_episodes(model_, envs_, envs_.size(), seeds, collect_options(epsilon()), act_rng_);
    RoundResult out;
    for (auto& ep : eps) {
      out.env_steps += ep.length;
      out.mean_return += ep.episode_return / static_cast<double>(eps.size());
      transitions_.add_episode(ep);
      replay_.add(std::move(ep));
    }
    out.episodes = eps.size();
    env_steps_ += out.env_steps;
    episodes_ += static_cast<long long>(out.episodes);
    if (episodes_ - last_sync_ >= cfg_.target_update_episodes) {
      sync_target();
      last_sync_ = episodes_;
    }
    return out;
  }

  void sync_target() { copy_parameters(target_, model_); }

  /// Samples a batch and trains on it; nullopt while the buffer is warming up.
  std::optional<TrainStats> train_step() {
    if (replay_.size() < static_cast<std::size_t>(cfg_.batch_size)) return std::nullopt;
    return train_on(replay_.sample(static_cast<std::size_t>(cfg_.batch_size), sample_rng_));
  }

  /// One update of the policy side (agent network and mixer) on the TD loss,
  /// of the variational classifiers on their likelihood objective, and of the
  /// inference network on a sample of stored transitions.
  TrainStats train_on(const std::vector<const EpisodeBatch*>& eps) {
    const auto batch = build_training_batch<T>(eps);
    TrainStats stats = policy_update(batch);
    if (cfg_.inference_enabled() && transitions_.size() > 0) inference_update(stats);
    ++train_steps_;
    return stats;
  }

  EvalResult evaluate(int n_episodes) {
    return trainer::evaluate(model_, eval_envs_, n_episodes, eval_seed_base(), cfg_.rollout_steps(), cfg_.gamma);
  }

 private:
  TrainStats policy_update(const TrainingBatch<T>& b) {
    TrainStats st;
    const int B = b.episodes, n = b.n_agents, L = b.max_length, rows = b.rows();
    const Eigen::Index first_rows = static_cast<Eigen::Index>(L) * rows;
    const T beta_mi = cfg_.intrinsic_enabled() ? static_cast<T>(cfg_.beta_mi) : T(0);
    const T beta_f = cfg_.inference_enabled() ? static_cast<T>(cfg_.beta_f) : T(0);
    const T gamma = static_cast<T>(cfg_.gamma);
    const bool mixing = !cfg_.disable_mixer;

    // bootstrap values from the target networks
    Matrix<T> next_max = Matrix<T>::Zero(static_cast<Eigen::Index>(L) * B, n);
    Matrix<T> next_value;
    {
      Tape<T> tape;
      const auto out = forward_sequences(tape, target_, b.seq);
      const Matrix<T>& tq = out.q.value();
      for (int t = 0; t < L; ++t)
        for (int e = 0; e < B; ++e) {
          if (t >= b.lengths[static_cast<std::size_t>(e)]) continue;
          for (int i = 0; i < n; ++i) {
            const Eigen::Index row = static_cast<Eigen::Index>(t + 1) * rows + e * n + i;
            const auto& m = b.avail[static_cast<std::size_t>(row)];
            T best = -std::numeric_limits<T>::infinity();
            for (int a = 0; a < tq.cols(); ++a)
              if (m[static_cast<std::size_t>(a)]) best = std::max(best, tq(row, a));
            next_max(t * B + e, i) = std::isfinite(static_cast<double>(best)) ? best : T(0);
          }
        }
      if (mixing) {
        auto cond = target_.mixer.conditioning(tape.constant(b.state.bottomRows(static_cast<Eigen::Index>(L) * B)),
                                               slice_rows(out.z, rows, first_rows));
        next_value = target_.mixer.mix(tape, tape.constant(next_max), cond).value();
      }
    }

    Tape<T> tape;
    const auto out = forward_sequences(tape, model_, b.seq);
    auto chosen = pick(slice_rows(out.q, 0, first_rows), b.actions);
    Var<T> td;
    Matrix<T> targets, mask;
    if (mixing) {
      auto cond = model_.mixer.conditioning(tape.constant(b.state.topRows(static_cast<Eigen::Index>(L) * B)),
                                            slice_rows(out.z, 0, first_rows));
      auto q_total = model_.mixer.mix(tape, reshape(chosen, static_cast<Eigen::Index>(L) * B, n), cond);
      targets = mixer::td_targets<T>(b.reward, b.r_mi, b.r_f, b.terminated, next_value, gamma, beta_mi, beta_f);
      mask = b.mask;
      td = mixer::td_loss(tape, q_total, targets, mask);
      st.q_taken_mean = masked_mean(q_total.value(), mask);
    } else {
      // independent learners: every agent regresses on the team target
      auto per_agent = [&](const Matrix<T>& m) {
        Matrix<T> out_m(first_rows, 1);
        for (Eigen::Index k = 0; k < first_rows; ++k) out_m(k, 0) = m(k / n, 0);
        return out_m;
      };
      Matrix<T> next(first_rows, 1);
      for (Eigen::Index k = 0; k < first_rows; ++k) next(k, 0) = next_max(k / n, k % n);
      targets = mixer::td_targets<T>(per_agent(b.reward), per_agent(b.r_mi), per_agent(b.r_f),
                                     per_agent(b.terminated), next, gamma, beta_mi, beta_f);
      mask = per_agent(b.mask);
      td = mixer::td_loss(tape, chosen, targets, mask);
      st.q_taken_mean = masked_mean(chosen.value(), mask);
    }
    st.td_loss = static_cast<double>(td.scalar());
    st.target_mean = masked_mean(targets, mask);
    st.r_mi_mean = masked_mean(b.r_mi, b.mask);
    st.r_f_mean = masked_mean(b.r_f, b.mask);

    Var<T> total = td;
    if (cfg_.intrinsic_enabled()) {
      std::vector<Eigen::Index> idx;
      std::vector<int> labels, acts;
      for (int t = 0; t < L; ++t)
        for (int e = 0; e < B; ++e) {
          if (t >= b.lengths[static_cast<std::size_t>(e)]) continue;
          for (int i = 0; i < n; ++i) {
            const Eigen::Index row = static_cast<Eigen::Index>(t) * rows + e * n + i;
            idx.push_back(row);
            labels.push_back(intrinsic::trajectory_class_label(i));
            acts.push_back(b.actions[static_cast<std::size_t>(row)]);
          }
        }
      Matrix<T> obs(static_cast<Eigen::Index>(idx.size()), b.obs.cols());
      for (std::size_t k = 0; k < idx.size(); ++k) obs.row(static_cast<Eigen::Index>(k)) = b.obs.row(idx[k]);
      auto z = take_rows(grad_scale(slice_rows(out.z, 0, first_rows), beta_mi), idx);
      const auto vl = intrinsic::variational_loss(tape, model_.variational, tape.constant(obs), z, labels, acts);
      st.variational_loss = static_cast<double>(vl.loss.scalar());
      st.tau_accuracy = vl.tau_accuracy;
      st.action_accuracy = vl.action_accuracy;
      total = add(total, vl.loss);
    }

    tape.backward(total);
    const T clip = static_cast<T>(cfg_.grad_clip);
    st.grad_norm = static_cast<double>(clip_grad_norm(policy_params_, clip));
    policy_opt_.step(policy_params_);
    if (cfg_.intrinsic_enabled()) {
      clip_grad_norm(variational_params_, clip);
      variational_opt_.step(variational_params_);
    }
    return st;
  }

  void inference_update(TrainStats& st) {
    Matrix<T> obs, next_obs, rewards;
    std::vector<int> actions;
    transitions_.sample<T>(static_cast<std::size_t>(cfg_.inference_batch_size), sample_rng_, obs, actions, next_obs,
                           rewards);
    Tape<T> tape;
    const auto l = worldmodel::inference_loss(tape, model_.inference, model_.inference.encode_inputs(obs, actions),
                                              next_obs, rewards, static_cast<T>(cfg_.beta_o),
                                              static_cast<T>(cfg_.beta_r));
    tape.backward(l.loss);
    clip_grad_norm(inference_params_, static_cast<T>(cfg_.grad_clip));
    inference_opt_.step(inference_params_);
    st.inference_loss = static_cast<double>(l.loss.scalar());
    st.obs_mse = l.obs_mse;
    st.reward_mse = l.reward_mse;
  }

  static const TrainConfig& validated(const TrainConfig& c) {
    c.validate();
    return c;
  }

  static double masked_mean(const Matrix<T>& v, const Matrix<T>& mask) {
    const double n = static_cast<double>(mask.sum());
    if (n <= 0) return 0.0;
    return static_cast<double>((v.array() * mask.array()).sum()) / n;
  }

  TrainConfig cfg_;
  env::VectorEnv envs_;
  env::VectorEnv eval_envs_;
  SmaugModel<T> model_;
  SmaugModel<T> target_;
  ReplayBuffer replay_;
  TransitionBuffer transitions_;
  EpsilonSchedule schedule_;
  Rng act_rng_, sample_rng_, env_seed_rng_;
  ParameterList<T> policy_params_, variational_params_, inference_params_;
  RmsPropState<T> policy_opt_, variational_opt_, inference_opt_;
  long long env_steps_ = 0;
  long long episodes_ = 0;
  long long last_sync_ = 0;
  long long train_steps_ = 0;
};

}  // namespace smaug::trainer
