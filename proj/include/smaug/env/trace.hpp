// Newline-delimited JSON episode traces.

#pragma once

#include "smaug/env/dec_pomdp.hpp"

#include <json.hpp>

#include <ostream>

namespace smaug::env {

struct TraceRecord {
  int step = 0;
  std::vector<float> state;
  std::vector<Observation> observations;
  std::vector<int> actions;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
};

inline nlohmann::json to_json(const TraceRecord& r) {
  return {{"step", r.step},         {"state", r.state},           {"observations", r.observations},
          {"actions", r.actions},   {"reward", r.reward},         {"terminated", r.terminated},
          {"truncated", r.truncated}};
}

inline void write_trace_line(std::ostream& os, const TraceRecord& r) { os << to_json(r).dump() << '\n'; }

/// Runs one episode with `policy(observations, masks) -> joint action` and
/// writes a record per step.
template <typename Policy>
double record_episode(Environment& env, std::uint64_t seed, Policy&& policy, std::ostream& os) {
  auto start = env.reset(seed);
  auto obs = start.observations;
  auto state = start.state;
  auto masks = start.available_actions;
  double ret = 0.0;
  for (int t = 0;; ++t) {
    TraceRecord rec;
    rec.step = t;
    rec.state = state;
    rec.observations = obs;
    rec.actions = policy(obs, masks);
    auto r = env.step(rec.actions);
    rec.reward = r.reward;
    rec.terminated = r.terminated;
    rec.truncated = r.truncated;
    write_trace_line(os, rec);
    ret += r.reward;
    if (r.done()) break;
    obs = r.next_observations;
    state = r.global_state;
    masks = r.available_actions;
  }
  return ret;
}

}  // namespace smaug::env
