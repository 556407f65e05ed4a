// E independent environment instances stepped in lockstep.

#pragma once

#include "smaug/env/dec_pomdp.hpp"

#include <optional>

namespace smaug::env {

/// Deterministic successor seed for auto-resets (splitmix64 step).
inline std::uint64_t next_seed(std::uint64_t s) {
  std::uint64_t z = s + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct VectorStep {
  std::vector<StepResult> results;
  /// Set for instances that finished and were auto-reset; holds the first
  /// observation of the new episode.
  std::vector<std::optional<ResetResult>> resets;
};

class VectorEnv {
 public:
  explicit VectorEnv(std::vector<std::unique_ptr<Environment>> envs) : envs_(std::move(envs)) {
    if (envs_.empty()) throw std::invalid_argument("VectorEnv needs at least one instance");
    seeds_.assign(envs_.size(), 0);
  }

  VectorEnv(const Environment& prototype, std::size_t count) {
    if (count == 0) throw std::invalid_argument("VectorEnv needs at least one instance");
    for (std::size_t i = 0; i < count; ++i) envs_.push_back(prototype.clone());
    seeds_.assign(count, 0);
  }

  std::size_t size() const { return envs_.size(); }
  Environment& at(std::size_t i) { return *envs_[i]; }
  const DecPomdpSpec& spec() const { return envs_.front()->spec(); }

  std::vector<ResetResult> reset(const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() != envs_.size())
      throw std::invalid_argument("vector_reset: " + std::to_string(seeds.size()) + " seeds for " +
                                  std::to_string(envs_.size()) + " instances");
    std::vector<ResetResult> out;
    for (std::size_t i = 0; i < envs_.size(); ++i) {
      seeds_[i] = seeds[i];
      out.push_back(envs_[i]->reset(seeds[i]));
    }
    return out;
  }

  /// Steps every instance. Finished instances are reset with the next seed of
  /// their own sequence when auto_reset is set.
  VectorStep step(const std::vector<std::vector<int>>& joint_actions, bool auto_reset = true) {
    if (joint_actions.size() != envs_.size())
      throw std::invalid_argument("vector_step: " + std::to_string(joint_actions.size()) +
                                  " joint actions for " + std::to_string(envs_.size()) + " instances");
    VectorStep out;
    out.resets.resize(envs_.size());
    for (std::size_t i = 0; i < envs_.size(); ++i) {
      try {
        out.results.push_back(envs_[i]->step(joint_actions[i]));
      } catch (const ContractViolation& e) {
        throw ContractViolation("instance " + std::to_string(i) + ": " + e.what());
      }
      if (auto_reset && out.results.back().done()) {
        seeds_[i] = next_seed(seeds_[i]);
        out.resets[i] = envs_[i]->reset(seeds_[i]);
      }
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<Environment>> envs_;
  std::vector<std::uint64_t> seeds_;
};

}  // namespace smaug::env
