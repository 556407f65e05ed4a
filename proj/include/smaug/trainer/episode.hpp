// One recorded episode, replay storage and the exploration schedule.
//
// Slots t = 0..length hold the observation side of the episode (the last slot
// is the final observation); transitions t = 0..length-1 hold actions,
// rewards and flags. Rows inside a slot are agents.

#pragma once

#include "smaug/numerics/tensor.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <deque>
#include <random>
#include <string>
#include <vector>

namespace smaug::trainer {

struct EpisodeBatch {
  int n_agents = 0;
  int obs_dim = 0;
  int state_dim = 0;
  int n_actions = 0;
  int z_dim = 0;
  int n_f = 0;  // predicted steps stored per slot
  int episode_limit = 0;
  int length = 0;  // transitions

  std::vector<float> obs;             // [slot][agent][obs_dim]
  std::vector<float> state;           // [slot][state_dim]
  std::vector<std::uint8_t> avail;    // [slot][agent][n_actions]
  std::vector<float> z;               // [slot][agent][z_dim]
  std::vector<float> pred_obs;        // [slot][m][agent][obs_dim]
  std::vector<int> pred_actions;      // [slot][m][agent]
  std::vector<int> goal;              // [slot], ground-truth subtask or -1
  std::vector<int> actions;           // [t][agent]
  std::vector<float> reward;          // [t]
  std::vector<std::uint8_t> terminated;  // [t]
  std::vector<float> r_mi;            // [t], summed over agents
  std::vector<float> r_f;             // [t]
  std::vector<float> attention;       // [slot][agent][heads * n_window], only when recorded

  double episode_return = 0.0;
  bool success = false;

  int slots() const { return length + 1; }

  /// 1 for real transitions, 0 for padding up to episode_limit.
  std::uint8_t filled(int t) const { return t >= 0 && t < length ? 1 : 0; }

  const float* obs_at(int slot, int agent) const {
    return obs.data() + (static_cast<std::size_t>(slot) * n_agents + agent) * obs_dim;
  }
  const float* state_at(int slot) const { return state.data() + static_cast<std::size_t>(slot) * state_dim; }
  const std::uint8_t* avail_at(int slot, int agent) const {
    return avail.data() + (static_cast<std::size_t>(slot) * n_agents + agent) * n_actions;
  }
  const float* z_at(int slot, int agent) const {
    return z.data() + (static_cast<std::size_t>(slot) * n_agents + agent) * z_dim;
  }
  const float* pred_obs_at(int slot, int m, int agent) const {
    return pred_obs.data() + ((static_cast<std::size_t>(slot) * n_f + m) * n_agents + agent) * obs_dim;
  }
  int pred_action_at(int slot, int m, int agent) const {
    return pred_actions[(static_cast<std::size_t>(slot) * n_f + m) * n_agents + agent];
  }
  int action_at(int t, int agent) const { return actions[static_cast<std::size_t>(t) * n_agents + agent]; }

  /// Checks array sizes and that every action was available.
  void validate() const {
    const auto S = static_cast<std::size_t>(slots());
    const auto L = static_cast<std::size_t>(length);
    const auto n = static_cast<std::size_t>(n_agents);
    auto expect = [](std::size_t got, std::size_t want, const char* field) {
      if (got != want)
        throw DimensionError(std::string("episode field ") + field + " has " + std::to_string(got) +
                             " entries, expected " + std::to_string(want));
    };
    if (length < 1 || length > episode_limit) throw ArgumentError("episode length outside [1, episode_limit]");
    expect(obs.size(), S * n * static_cast<std::size_t>(obs_dim), "obs");
    expect(state.size(), S * static_cast<std::size_t>(state_dim), "state");
    expect(avail.size(), S * n * static_cast<std::size_t>(n_actions), "avail");
    expect(z.size(), S * n * static_cast<std::size_t>(z_dim), "z");
    expect(pred_obs.size(), S * static_cast<std::size_t>(n_f) * n * static_cast<std::size_t>(obs_dim), "pred_obs");
    expect(pred_actions.size(), S * static_cast<std::size_t>(n_f) * n, "pred_actions");
    expect(goal.size(), S, "goal");
    expect(actions.size(), L * n, "actions");
    expect(reward.size(), L, "reward");
    expect(terminated.size(), L, "terminated");
    expect(r_mi.size(), L, "r_mi");
    expect(r_f.size(), L, "r_f");
    for (int t = 0; t < length; ++t)
      for (int i = 0; i < n_agents; ++i) {
        const int a = action_at(t, i);
        if (a < 0 || a >= n_actions || !avail_at(t, i)[a])
          throw ArgumentError("episode step " + std::to_string(t) + " agent " + std::to_string(i) +
                              ": recorded action " + std::to_string(a) + " is unavailable");
      }
  }

  /// Canonical byte serialization, used for determinism checks.
  std::string bytes() const {
    std::string out;
    auto put = [&](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    auto put_vec = [&](const auto& v) {
      const std::uint64_t n = v.size();
      put(&n, sizeof n);
      put(v.data(), v.size() * sizeof(v[0]));
    };
    for (int v : {n_agents, obs_dim, state_dim, n_actions, z_dim, n_f, episode_limit, length}) put(&v, sizeof v);
    put_vec(obs);
    put_vec(state);
    put_vec(avail);
    put_vec(z);
    put_vec(pred_obs);
    put_vec(pred_actions);
    put_vec(goal);
    put_vec(actions);
    put_vec(reward);
    put_vec(terminated);
    put_vec(r_mi);
    put_vec(r_f);
    put_vec(attention);
    put(&episode_return, sizeof episode_return);
    const std::uint8_t s = success;
    put(&s, 1);
    return out;
  }
};

/// FIFO ring of whole episodes with uniform sampling without replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ArgumentError("replay buffer capacity must be positive");
  }

  void add(EpisodeBatch ep) {
    if (episodes_.size() == capacity_) episodes_.pop_front();
    episodes_.push_back(std::move(ep));
    ++total_added_;
  }

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_added() const { return total_added_; }
  const EpisodeBatch& at(std::size_t i) const { return episodes_.at(i); }

  /// Distinct indices into the buffer, in increasing order.
  template <typename Rng>
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    if (batch > episodes_.size())
      throw ArgumentError("replay buffer holds " + std::to_string(episodes_.size()) + " episodes, cannot sample " +
                          std::to_string(batch));
    std::vector<std::size_t> all(episodes_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<std::size_t> out;
    out.reserve(batch);
    std::sample(all.begin(), all.end(), std::back_inserter(out), batch, rng);
    return out;
  }

  template <typename Rng>
  std::vector<const EpisodeBatch*> sample(std::size_t batch, Rng& rng) const {
    std::vector<const EpisodeBatch*> out;
    for (auto i : sample_indices(batch, rng)) out.push_back(&episodes_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<EpisodeBatch> episodes_;
  std::uint64_t total_added_ = 0;
};

/// Per-agent one-step transitions for the world model: (o, a) -> (o', r).
class TransitionBuffer {
 public:
  TransitionBuffer(std::size_t capacity, int obs_dim) : capacity_(capacity), obs_dim_(obs_dim) {
    if (capacity == 0) throw ArgumentError("inference buffer capacity must be positive");
  }

  void add_episode(const EpisodeBatch& ep) {
    for (int t = 0; t < ep.length; ++t)
      for (int i = 0; i < ep.n_agents; ++i) {
        Item item;
        item.obs.assign(ep.obs_at(t, i), ep.obs_at(t, i) + obs_dim_);
        item.next_obs.assign(ep.obs_at(t + 1, i), ep.obs_at(t + 1, i) + obs_dim_);
        item.action = ep.action_at(t, i);
        item.reward = ep.reward[static_cast<std::size_t>(t)];
        if (items_.size() == capacity_) items_.pop_front();
        items_.push_back(std::move(item));
      }
  }

  std::size_t size() const { return items_.size(); }

  /// Uniform draws with replacement; fills [batch x obs] matrices.
  template <typename T, typename Rng>
  void sample(std::size_t batch, Rng& rng, Matrix<T>& obs, std::vector<int>& actions, Matrix<T>& next_obs,
              Matrix<T>& rewards) const {
    if (items_.empty()) throw ArgumentError("inference buffer is empty");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    const auto B = static_cast<Eigen::Index>(batch);
    obs.resize(B, obs_dim_);
    next_obs.resize(B, obs_dim_);
    rewards.resize(B, 1);
    actions.resize(batch);
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& it = items_[pick(rng)];
      for (int d = 0; d < obs_dim_; ++d) {
        obs(b, d) = static_cast<T>(it.obs[static_cast<std::size_t>(d)]);
        next_obs(b, d) = static_cast<T>(it.next_obs[static_cast<std::size_t>(d)]);
      }
      actions[static_cast<std::size_t>(b)] = it.action;
      rewards(b, 0) = static_cast<T>(it.reward);
    }
  }

 private:
  struct Item {
    std::vector<float> obs, next_obs;
    int action = 0;
    float reward = 0.0f;
  };
  std::size_t capacity_;
  int obs_dim_;
  std::deque<Item> items_;
};

/// Linear decay from start to end over anneal_steps environment steps.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double anneal_steps = 5e4;

  double at(double step) const {
    if (step < 0) throw ArgumentError("epsilon schedule: step must be >= 0");
    if (anneal_steps <= 0 || step >= anneal_steps) return end;
    const double v = start + (end - start) * (step / anneal_steps);
    return std::clamp(v, std::min(start, end), std::max(start, end));
  }
};

}  // namespace smaug::trainer
