// Dec-POMDP environment interface: n agents, local observations, one team
// reward per step, discrete per-agent actions with availability masks.

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace smaug::env {

/// Raised when a caller breaks the step contract (bad or unavailable action,
/// stepping a finished episode).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct DecPomdpSpec {
  int n_agents = 1;
  int state_dim = 1;
  int obs_dim = 1;
  int n_actions = 2;
  int episode_limit = 1;
  double gamma = 0.99;

  void validate() const {
    if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
    if (n_actions < 2) throw std::invalid_argument("n_actions must be >= 2");
    if (episode_limit < 1) throw std::invalid_argument("episode_limit must be >= 1");
    if (state_dim < 1 || obs_dim < 1) throw std::invalid_argument("state/obs dims must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
  }
};

using Observation = std::vector<float>;
using ActionMask = std::vector<std::uint8_t>;

struct ResetResult {
  std::vector<Observation> observations;
  std::vector<float> state;
  std::vector<ActionMask> available_actions;
};

struct StepResult {
  std::vector<Observation> next_observations;
  std::vector<float> global_state;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  std::vector<ActionMask> available_actions;

  bool done() const { return terminated || truncated; }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const DecPomdpSpec& spec() const = 0;
  virtual ResetResult reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& joint_action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual std::string name() const = 0;

  /// Ground-truth subtask id for diagnostics; -1 when the env has none.
  virtual int ground_truth_subtask() const { return -1; }
  /// Whether the current (finished) episode counts as a task success.
  virtual bool episode_success() const = 0;
  /// Per-step team reward bounds.
  virtual double max_step_reward() const = 0;
  virtual double min_step_reward() const = 0;
};

/// Shared step-contract checks.
inline void check_joint_action(const DecPomdpSpec& spec, const std::vector<ActionMask>& avail,
                               const std::vector<int>& joint_action) {
  if (static_cast<int>(joint_action.size()) != spec.n_agents)
    throw ContractViolation("expected " + std::to_string(spec.n_agents) + " actions, got " +
                            std::to_string(joint_action.size()));
  for (int i = 0; i < spec.n_agents; ++i) {
    const int a = joint_action[static_cast<std::size_t>(i)];
    if (a < 0 || a >= spec.n_actions)
      throw ContractViolation("agent " + std::to_string(i) + ": action " + std::to_string(a) +
                              " outside [0, " + std::to_string(spec.n_actions) + ")");
    if (!avail[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)])
      throw ContractViolation("agent " + std::to_string(i) + ": action " + std::to_string(a) +
                              " is unavailable");
  }
}

}  // namespace smaug::env
