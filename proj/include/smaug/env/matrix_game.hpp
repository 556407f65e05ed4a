// Small multi-step tabular games with deterministic transitions, plus an
// exhaustive-enumeration oracle for the optimal joint return.

#pragma once

#include "smaug/env/dec_pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace smaug::env {

/// Joint actions are indexed with agent 0 as the least significant digit:
/// joint = a_0 + A * a_1 + A^2 * a_2 + ...
struct TabularGameSpec {
  int n_agents = 2;
  int n_actions = 2;
  int n_states = 1;
  int horizon = 1;
  int start_state = 0;
  double gamma = 0.99;
  std::vector<std::vector<double>> payoff;   // [state][joint]
  std::vector<std::vector<int>> next_state;  // [state][joint]; -1 ends the episode

  int n_joint() const {
    int j = 1;
    for (int i = 0; i < n_agents; ++i) j *= n_actions;
    return j;
  }

  void validate() const {
    if (n_agents < 1 || n_actions < 2 || n_states < 1 || horizon < 1)
      throw std::invalid_argument("tabular game: bad dimensions");
    if (start_state < 0 || start_state >= n_states)
      throw std::invalid_argument("tabular game: start state out of range");
    const auto nj = static_cast<std::size_t>(n_joint());
    if (payoff.size() != static_cast<std::size_t>(n_states) ||
        next_state.size() != static_cast<std::size_t>(n_states))
      throw std::invalid_argument("tabular game: tables must have one row per state");
    for (int s = 0; s < n_states; ++s) {
      if (payoff[static_cast<std::size_t>(s)].size() != nj || next_state[static_cast<std::size_t>(s)].size() != nj)
        throw std::invalid_argument("tabular game: each row needs one entry per joint action");
      for (int n : next_state[static_cast<std::size_t>(s)])
        if (n < -1 || n >= n_states) throw std::invalid_argument("tabular game: bad next state");
    }
  }
};

inline int joint_index(const std::vector<int>& actions, int n_actions) {
  int j = 0, place = 1;
  for (int a : actions) {
    j += a * place;
    place *= n_actions;
  }
  return j;
}

/// Two-step cooperative game: agent 0's first action selects between a
/// uniform payoff-7 matrix and a coordination matrix whose optimum is 8.
inline TabularGameSpec two_step_game(double gamma = 0.99) {
  TabularGameSpec g;
  g.n_agents = 2;
  g.n_actions = 2;
  g.n_states = 3;
  g.horizon = 2;
  g.gamma = gamma;
  g.payoff = {{0, 0, 0, 0}, {7, 7, 7, 7}, {0, 1, 1, 8}};
  // joint = a0 + 2 a1; agent 0's action picks the branch
  g.next_state = {{1, 2, 1, 2}, {-1, -1, -1, -1}, {-1, -1, -1, -1}};
  return g;
}

/// Single-step matrix game with the given payoff table over joint actions.
inline TabularGameSpec one_step_game(int n_agents, int n_actions, std::vector<double> payoff,
                                     double gamma = 0.99) {
  TabularGameSpec g;
  g.n_agents = n_agents;
  g.n_actions = n_actions;
  g.n_states = 1;
  g.horizon = 1;
  g.gamma = gamma;
  g.payoff = {std::move(payoff)};
  g.next_state = {std::vector<int>(g.payoff[0].size(), -1)};
  return g;
}

/// Random two-step game: the first joint action chooses one of n_actions
/// second-stage states (joint mod n_actions); payoffs uniform in [-5, 10].
inline TabularGameSpec random_two_step_game(int n_agents, int n_actions, std::uint64_t seed,
                                            double gamma = 0.99) {
  TabularGameSpec g;
  g.n_agents = n_agents;
  g.n_actions = n_actions;
  g.n_states = 1 + n_actions;
  g.horizon = 2;
  g.gamma = gamma;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pay(-5.0, 10.0);
  const int nj = g.n_joint();
  g.payoff.assign(static_cast<std::size_t>(g.n_states), std::vector<double>(static_cast<std::size_t>(nj)));
  g.next_state.assign(static_cast<std::size_t>(g.n_states), std::vector<int>(static_cast<std::size_t>(nj), -1));
  for (auto& row : g.payoff)
    for (auto& v : row) v = pay(rng);
  for (int j = 0; j < nj; ++j) g.next_state[0][static_cast<std::size_t>(j)] = 1 + j % n_actions;
  return g;
}

inline constexpr double kOracleEnumerationCap = 1e6;

/// Exact optimal discounted joint return by enumerating every joint-action
/// sequence. Refuses games beyond 3 agents, 5 actions or the sequence cap.
inline double matrix_game_oracle(const TabularGameSpec& g, double gamma) {
  g.validate();
  if (g.n_agents > 3 || g.n_actions > 5)
    throw std::invalid_argument("matrix_game_oracle: at most 3 agents and 5 actions supported");
  const double sequences = std::pow(static_cast<double>(g.n_joint()), g.horizon);
  if (sequences > kOracleEnumerationCap)
    throw std::invalid_argument("matrix_game_oracle: " + std::to_string(sequences) +
                                " joint-action sequences exceed the enumeration cap");
  const auto total = static_cast<long long>(sequences);
  const int nj = g.n_joint();
  double best = -std::numeric_limits<double>::infinity();
  for (long long code = 0; code < total; ++code) {
    long long rest = code;
    int s = g.start_state;
    double ret = 0.0, discount = 1.0;
    for (int t = 0; t < g.horizon && s >= 0; ++t) {
      const int j = static_cast<int>(rest % nj);
      rest /= nj;
      ret += discount * g.payoff[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
      discount *= gamma;
      s = g.next_state[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
    }
    best = std::max(best, ret);
  }
  return best;
}

inline double matrix_game_oracle(const TabularGameSpec& g) { return matrix_game_oracle(g, g.gamma); }

/// Environment wrapper: every agent observes the one-hot current state.
class MatrixGameEnv final : public Environment {
 public:
  explicit MatrixGameEnv(TabularGameSpec game) : game_(std::move(game)) {
    game_.validate();
    spec_.n_agents = game_.n_agents;
    spec_.n_actions = game_.n_actions;
    spec_.obs_dim = game_.n_states;
    spec_.state_dim = game_.n_states;
    spec_.episode_limit = game_.horizon;
    spec_.gamma = game_.gamma;
    spec_.validate();
    double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
    for (const auto& row : game_.payoff)
      for (double v : row) {
        hi = std::max(hi, v);
        lo = std::min(lo, v);
      }
    max_reward_ = hi;
    min_reward_ = lo;
    best_return_ = matrix_game_oracle(game_, 1.0);
  }

  const DecPomdpSpec& spec() const override { return spec_; }
  const TabularGameSpec& game() const { return game_; }
  std::string name() const override { return "matrix_game"; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<MatrixGameEnv>(*this); }

  ResetResult reset(std::uint64_t) override {
    state_ = game_.start_state;
    t_ = 0;
    ret_ = 0.0;
    done_ = false;
    return {observations(), encode(), available()};
  }

  StepResult step(const std::vector<int>& joint_action) override {
    if (done_) throw ContractViolation("step called on a finished episode; reset first");
    check_joint_action(spec_, available(), joint_action);
    const int j = joint_index(joint_action, game_.n_actions);
    StepResult r;
    r.reward = game_.payoff[static_cast<std::size_t>(state_)][static_cast<std::size_t>(j)];
    ret_ += r.reward;
    const int next = game_.next_state[static_cast<std::size_t>(state_)][static_cast<std::size_t>(j)];
    ++t_;
    r.terminated = next < 0 || t_ >= game_.horizon;
    done_ = r.terminated;
    if (next >= 0) state_ = next;
    r.next_observations = observations();
    r.global_state = encode();
    r.available_actions = available();
    return r;
  }

  bool episode_success() const override { return ret_ >= best_return_ - 1e-9; }
  double max_step_reward() const override { return max_reward_; }
  double min_step_reward() const override { return min_reward_; }
  int current_state() const { return state_; }

 private:
  std::vector<float> encode() const {
    std::vector<float> v(static_cast<std::size_t>(game_.n_states), 0.0f);
    v[static_cast<std::size_t>(state_)] = 1.0f;
    return v;
  }
  std::vector<Observation> observations() const {
    return std::vector<Observation>(static_cast<std::size_t>(game_.n_agents), encode());
  }
  std::vector<ActionMask> available() const {
    return std::vector<ActionMask>(static_cast<std::size_t>(game_.n_agents),
                                   ActionMask(static_cast<std::size_t>(game_.n_actions), 1));
  }

  TabularGameSpec game_;
  DecPomdpSpec spec_;
  int state_ = 0;
  int t_ = 0;
  double ret_ = 0.0;
  bool done_ = true;
  double max_reward_ = 0.0, min_reward_ = 0.0, best_return_ = 0.0;
};

}  // namespace smaug::env
