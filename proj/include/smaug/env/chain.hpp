// Deterministic 1-D chain: one-hot position, actions stay/left/right,
// reward 1 on reaching the right end. Used as a known transition function
// for world-model learning tests.

#pragma once

#include "smaug/env/dec_pomdp.hpp"

#include <algorithm>
#include <random>

namespace smaug::env {

struct ChainConfig {
  int length = 6;
  int n_agents = 1;
  int episode_limit = 12;
};

class ChainEnv final : public Environment {
 public:
  enum Action { kStay = 0, kLeft = 1, kRight = 2 };

  explicit ChainEnv(ChainConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.length < 2) throw std::invalid_argument("chain length must be >= 2");
    spec_.n_agents = cfg_.n_agents;
    spec_.n_actions = 3;
    spec_.obs_dim = cfg_.length;
    spec_.state_dim = cfg_.length * cfg_.n_agents;
    spec_.episode_limit = cfg_.episode_limit;
    spec_.validate();
  }

  const DecPomdpSpec& spec() const override { return spec_; }
  std::string name() const override { return "chain"; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ChainEnv>(*this); }

  /// Pure transition used as ground truth: (position, action) -> position.
  int next_position(int pos, int action) const {
    if (action == kLeft) return std::max(0, pos - 1);
    if (action == kRight) return std::min(cfg_.length - 1, pos + 1);
    return pos;
  }
  double reward_for(int next_pos) const { return next_pos == cfg_.length - 1 ? 1.0 : 0.0; }

  Observation encode(int pos) const {
    Observation o(static_cast<std::size_t>(cfg_.length), 0.0f);
    o[static_cast<std::size_t>(pos)] = 1.0f;
    return o;
  }

  ResetResult reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    pos_.assign(static_cast<std::size_t>(cfg_.n_agents), 0);
    for (auto& p : pos_) p = std::uniform_int_distribution<int>(0, cfg_.length - 2)(rng);
    t_ = 0;
    reached_ = false;
    done_ = false;
    return {observations(), state(), available()};
  }

  StepResult step(const std::vector<int>& joint_action) override {
    if (done_) throw ContractViolation("step called on a finished episode; reset first");
    check_joint_action(spec_, available(), joint_action);
    StepResult r;
    for (std::size_t i = 0; i < pos_.size(); ++i) {
      pos_[i] = next_position(pos_[i], joint_action[i]);
      r.reward += reward_for(pos_[i]);
    }
    reached_ = reached_ || r.reward > 0;
    ++t_;
    r.truncated = t_ >= cfg_.episode_limit;
    done_ = r.truncated;
    r.next_observations = observations();
    r.global_state = state();
    r.available_actions = available();
    return r;
  }

  bool episode_success() const override { return reached_; }
  double max_step_reward() const override { return cfg_.n_agents; }
  double min_step_reward() const override { return 0.0; }

 private:
  std::vector<Observation> observations() const {
    std::vector<Observation> obs;
    for (int p : pos_) obs.push_back(encode(p));
    return obs;
  }
  std::vector<float> state() const {
    std::vector<float> s;
    for (int p : pos_) {
      auto o = encode(p);
      s.insert(s.end(), o.begin(), o.end());
    }
    return s;
  }
  std::vector<ActionMask> available() const {
    return std::vector<ActionMask>(pos_.size(), ActionMask(3, 1));
  }

  ChainConfig cfg_;
  DecPomdpSpec spec_;
  std::vector<int> pos_;
  int t_ = 0;
  bool reached_ = false;
  bool done_ = true;
};

}  // namespace smaug::env
