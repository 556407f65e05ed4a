// Training loop driver: collection rounds, training steps, periodic greedy
// evaluation, metrics CSV and checkpoints.

#pragma once

#include "smaug/trainer/learner.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>

namespace smaug::trainer {

inline const char* kMetricsHeader =
    "step,episodes,td_loss,inference_loss,variational_loss,r_mi_mean,r_f_mean,eval_return,eval_success_rate,"
    "eval_std,epsilon,env_steps,grad_norm,q_taken_mean,target_mean,tau_accuracy,action_accuracy,obs_mse,"
    "reward_mse\n";

/// Shortest round-trip decimal for a double; identical inputs give identical text.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct EvalPoint {
  long long env_steps = 0;
  EvalResult result;
};

struct RunResult {
  std::vector<EvalPoint> curve;
  EvalResult final_eval;
  long long env_steps = 0;
  long long episodes = 0;
  long long train_steps = 0;
  std::string metrics_csv;
};

struct RunOptions {
  std::filesystem::path out_dir;  // empty: keep everything in memory
  std::ostream* log = nullptr;
  bool eval_at_start = false;
};

/// Area under a piecewise-linear learning curve over [0, horizon], holding
/// the last value past the final point and the first value before it.
inline double curve_auc(const std::vector<EvalPoint>& curve, double horizon) {
  if (curve.empty() || horizon <= 0) return 0.0;
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, curve.front().result.mean_return);
  for (const auto& p : curve)
    if (p.env_steps > 0) pts.emplace_back(static_cast<double>(p.env_steps), p.result.mean_return);
  pts.emplace_back(std::max(horizon, pts.back().first), pts.back().second);
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const double x0 = std::min(pts[k - 1].first, horizon), x1 = std::min(pts[k].first, horizon);
    if (x1 <= x0) continue;
    const double span = pts[k].first - pts[k - 1].first;
    auto at = [&](double x) {
      return span > 0 ? pts[k - 1].second + (pts[k].second - pts[k - 1].second) * (x - pts[k - 1].first) / span
                      : pts[k].second;
    };
    area += 0.5 * (at(x0) + at(x1)) * (x1 - x0);
  }
  return area;
}

template <typename T>
RunResult run_training(Learner<T>& learner, const RunOptions& options) {
  const auto& cfg = learner.config();
  RunResult out;
  std::string csv = kMetricsHeader;
  namespace fs = std::filesystem;
  auto save_metrics = [&] {
    if (!options.out_dir.empty()) write_file_atomic(options.out_dir / "metrics.csv", csv);
  };
  auto save_checkpoint = [&](const std::string& name) {
    if (!options.out_dir.empty()) write_file_atomic(options.out_dir / name, encode_model(learner.model()));
  };

  long long next_eval = cfg.eval_interval;
  long long next_checkpoint = cfg.checkpoint_interval;
  if (options.eval_at_start) out.curve.push_back({0, learner.evaluate(cfg.eval_episodes)});

  while (learner.env_steps() < cfg.total_env_steps) {
    const double epsilon = learner.epsilon();
    learner.collect_round();
    std::vector<TrainStats> stats;
    for (int k = 0; k < cfg.train_steps_per_round; ++k)
      if (auto s = learner.train_step()) stats.push_back(*s);

    std::optional<EvalResult> eval;
    if (learner.env_steps() >= next_eval) {
      eval = learner.evaluate(cfg.eval_episodes);
      out.curve.push_back({learner.env_steps(), *eval});
      while (next_eval <= learner.env_steps()) next_eval += cfg.eval_interval;
      if (options.log)
        *options.log << "env_steps " << learner.env_steps() << " episodes " << learner.episodes() << " eval_return "
                     << eval->mean_return << " success " << eval->success_rate << "\n";
    }

    for (std::size_t k = 0; k < stats.size(); ++k) {
      const auto& s = stats[k];
      const bool with_eval = eval && k + 1 == stats.size();
      const long long step = learner.train_steps() - static_cast<long long>(stats.size() - 1 - k);
      std::string row;
      auto field = [&](const std::string& v) {
        if (!row.empty()) row += ',';
        row += v;
      };
      field(std::to_string(step));
      field(std::to_string(learner.episodes()));
      field(format_number(s.td_loss));
      field(format_number(s.inference_loss));
      field(format_number(s.variational_loss));
      field(format_number(s.r_mi_mean));
      field(format_number(s.r_f_mean));
      field(with_eval ? format_number(eval->mean_return) : "");
      field(with_eval ? format_number(eval->success_rate) : "");
      field(with_eval ? format_number(eval->std_return) : "");
      field(format_number(epsilon));
      field(std::to_string(learner.env_steps()));
      field(format_number(s.grad_norm));
      field(format_number(s.q_taken_mean));
      field(format_number(s.target_mean));
      field(format_number(s.tau_accuracy));
      field(format_number(s.action_accuracy));
      field(format_number(s.obs_mse));
      field(format_number(s.reward_mse));
      csv += row + '\n';
    }

    if (eval) save_metrics();
    if (cfg.checkpoint_interval > 0 && learner.episodes() >= next_checkpoint) {
      save_checkpoint("checkpoint_" + std::to_string(learner.episodes()) + ".bin");
      while (next_checkpoint <= learner.episodes()) next_checkpoint += cfg.checkpoint_interval;
    }
  }

  out.final_eval = learner.evaluate(cfg.eval_episodes);
  out.env_steps = learner.env_steps();
  out.episodes = learner.episodes();
  out.train_steps = learner.train_steps();
  save_metrics();
  save_checkpoint("final.bin");
  out.metrics_csv = std::move(csv);
  return out;
}

}  // namespace smaug::trainer
