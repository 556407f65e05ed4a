// Switching-goals gridworld.
//
// n agents move on a G x G grid with K goal sites. One site is active at a
// time; it switches after a random interval or when every agent stands on it
// (a capture). Agents see goal sites only within a view radius, so the
// active goal (the ground-truth subtask) has to be inferred from history.
//
// Actions: 0 stay, 1 up, 2 down, 3 left, 4 right.

#pragma once

#include "smaug/env/dec_pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>

namespace smaug::env {

struct SwitchingGoalsConfig {
  int grid_size = 7;
  int n_agents = 3;
  int n_goal_sites = 4;
  int switch_interval_min = 5;
  int switch_interval_max = 15;
  double capture_reward = 10.0;
  double step_penalty = -0.01;     // per agent per step
  double presence_reward = 0.1;    // per agent standing on the active site
  int episode_limit = 60;
  int view_radius = 3;

  void validate() const {
    if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
    if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
    if (n_goal_sites < 2) throw std::invalid_argument("n_goal_sites must be >= 2");
    if (n_goal_sites > grid_size * grid_size)
      throw std::invalid_argument("n_goal_sites exceeds grid cells");
    if (switch_interval_min < 1 || switch_interval_max < switch_interval_min)
      throw std::invalid_argument("switch interval range must satisfy 1 <= min <= max");
    if (episode_limit < 1) throw std::invalid_argument("episode_limit must be >= 1");
    if (view_radius < 0) throw std::invalid_argument("view_radius must be >= 0");
  }
};

class SwitchingGoalsEnv final : public Environment {
 public:
  enum Action { kStay = 0, kUp = 1, kDown = 2, kLeft = 3, kRight = 4 };
  static constexpr int kNumActions = 5;

  explicit SwitchingGoalsEnv(SwitchingGoalsConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    spec_.n_agents = cfg_.n_agents;
    spec_.n_actions = kNumActions;
    spec_.obs_dim = 2 * cfg_.grid_size + 2 * (cfg_.n_agents - 1) + 4 * cfg_.n_goal_sites;
    spec_.state_dim = 2 * cfg_.n_agents + 3 * cfg_.n_goal_sites + 1;
    spec_.episode_limit = cfg_.episode_limit;
    spec_.gamma = 0.99;
    spec_.validate();
  }

  const DecPomdpSpec& spec() const override { return spec_; }
  const SwitchingGoalsConfig& config() const { return cfg_; }
  std::string name() const override { return "switching_goals"; }
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<SwitchingGoalsEnv>(*this);
  }

  ResetResult reset(std::uint64_t seed) override {
    rng_.seed(seed);
    const int cells = cfg_.grid_size * cfg_.grid_size;
    std::vector<int> order(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    sites_.clear();
    for (int s = 0; s < cfg_.n_goal_sites; ++s)
      sites_.push_back(cell(order[static_cast<std::size_t>(s)]));
    agents_.clear();
    std::uniform_int_distribution<int> any_cell(0, cells - 1);
    for (int i = 0; i < cfg_.n_agents; ++i) agents_.push_back(cell(any_cell(rng_)));
    active_ = std::uniform_int_distribution<int>(0, cfg_.n_goal_sites - 1)(rng_);
    timer_ = draw_interval();
    t_ = 0;
    captures_ = 0;
    switches_ = 0;
    done_ = false;
    return {observations(), state(), available_actions()};
  }

  StepResult step(const std::vector<int>& joint_action) override {
    if (done_) throw ContractViolation("step called on a finished episode; reset first");
    check_joint_action(spec_, available_actions(), joint_action);
    for (int i = 0; i < cfg_.n_agents; ++i)
      agents_[static_cast<std::size_t>(i)] =
          move(agents_[static_cast<std::size_t>(i)], joint_action[static_cast<std::size_t>(i)]);
    ++t_;

    int on_active = 0;
    for (const auto& a : agents_) on_active += (a == sites_[static_cast<std::size_t>(active_)]);
    double reward = cfg_.n_agents * cfg_.step_penalty + on_active * cfg_.presence_reward;
    if (on_active == cfg_.n_agents) {
      reward += cfg_.capture_reward;
      ++captures_;
      switch_goal();
    } else if (--timer_ <= 0) {
      switch_goal();
    }

    StepResult r;
    r.reward = reward;
    r.terminated = false;
    r.truncated = t_ >= cfg_.episode_limit;
    done_ = r.truncated;
    r.next_observations = observations();
    r.global_state = state();
    r.available_actions = available_actions();
    return r;
  }

  int ground_truth_subtask() const override { return active_; }
  bool episode_success() const override { return captures_ > 0; }
  double max_step_reward() const override {
    return cfg_.capture_reward + cfg_.n_agents * (cfg_.presence_reward + cfg_.step_penalty);
  }
  double min_step_reward() const override {
    return cfg_.n_agents * std::min(cfg_.step_penalty, cfg_.step_penalty + cfg_.presence_reward);
  }

  int captures() const { return captures_; }
  int switches() const { return switches_; }
  int elapsed() const { return t_; }

  struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
  };
  const std::vector<Cell>& agent_cells() const { return agents_; }
  const std::vector<Cell>& site_cells() const { return sites_; }

 private:
  Cell cell(int index) const { return {index / cfg_.grid_size, index % cfg_.grid_size}; }

  Cell move(Cell c, int action) const {
    switch (action) {
      case kUp: --c.row; break;
      case kDown: ++c.row; break;
      case kLeft: --c.col; break;
      case kRight: ++c.col; break;
      default: break;
    }
    return c;
  }

  bool inside(Cell c) const {
    return c.row >= 0 && c.col >= 0 && c.row < cfg_.grid_size && c.col < cfg_.grid_size;
  }

  int draw_interval() {
    return std::uniform_int_distribution<int>(cfg_.switch_interval_min, cfg_.switch_interval_max)(rng_);
  }

  void switch_goal() {
    const int offset = std::uniform_int_distribution<int>(1, cfg_.n_goal_sites - 1)(rng_);
    active_ = (active_ + offset) % cfg_.n_goal_sites;
    timer_ = draw_interval();
    ++switches_;
  }

  std::vector<ActionMask> available_actions() const {
    std::vector<ActionMask> masks;
    for (const auto& a : agents_) {
      ActionMask m(kNumActions, 0);
      for (int act = 0; act < kNumActions; ++act) m[static_cast<std::size_t>(act)] = inside(move(a, act));
      masks.push_back(std::move(m));
    }
    return masks;
  }

  std::vector<Observation> observations() const {
    const float span = static_cast<float>(cfg_.grid_size - 1);
    std::vector<Observation> obs;
    for (int i = 0; i < cfg_.n_agents; ++i) {
      const Cell me = agents_[static_cast<std::size_t>(i)];
      Observation o(static_cast<std::size_t>(spec_.obs_dim), 0.0f);
      std::size_t k = 0;
      o[k + static_cast<std::size_t>(me.row)] = 1.0f;
      k += static_cast<std::size_t>(cfg_.grid_size);
      o[k + static_cast<std::size_t>(me.col)] = 1.0f;
      k += static_cast<std::size_t>(cfg_.grid_size);
      for (int j = 0; j < cfg_.n_agents; ++j) {
        if (j == i) continue;
        const Cell other = agents_[static_cast<std::size_t>(j)];
        o[k++] = static_cast<float>(other.row - me.row) / span;
        o[k++] = static_cast<float>(other.col - me.col) / span;
      }
      for (int s = 0; s < cfg_.n_goal_sites; ++s) {
        const Cell site = sites_[static_cast<std::size_t>(s)];
        const int dr = site.row - me.row, dc = site.col - me.col;
        const bool visible = std::max(std::abs(dr), std::abs(dc)) <= cfg_.view_radius;
        o[k++] = visible ? 1.0f : 0.0f;
        o[k++] = (visible && s == active_) ? 1.0f : 0.0f;
        o[k++] = visible ? static_cast<float>(dr) / span : 0.0f;
        o[k++] = visible ? static_cast<float>(dc) / span : 0.0f;
      }
      obs.push_back(std::move(o));
    }
    return obs;
  }

  std::vector<float> state() const {
    const float span = static_cast<float>(cfg_.grid_size - 1);
    std::vector<float> s;
    s.reserve(static_cast<std::size_t>(spec_.state_dim));
    auto norm = [&](int v) { return 2.0f * static_cast<float>(v) / span - 1.0f; };
    for (const auto& a : agents_) {
      s.push_back(norm(a.row));
      s.push_back(norm(a.col));
    }
    for (const auto& c : sites_) {
      s.push_back(norm(c.row));
      s.push_back(norm(c.col));
    }
    for (int k = 0; k < cfg_.n_goal_sites; ++k) s.push_back(k == active_ ? 1.0f : 0.0f);
    s.push_back(static_cast<float>(t_) / static_cast<float>(cfg_.episode_limit));
    return s;
  }

  SwitchingGoalsConfig cfg_;
  DecPomdpSpec spec_;
  std::mt19937_64 rng_{0};
  std::vector<Cell> sites_;
  std::vector<Cell> agents_;
  int active_ = 0;
  int timer_ = 1;
  int t_ = 0;
  int captures_ = 0;
  int switches_ = 0;
  bool done_ = true;
};

}  // namespace smaug::env
