// Command implementations behind the smaug executable. Each returns a
// process exit status: 0 success, 1 runtime failure, 2 invalid input.

#pragma once

#include "json.hpp"
#include "smaug/cli/config.hpp"
#include "smaug/cli/diagnostics.hpp"
#include "smaug/cli/gradcheck_suite.hpp"
#include "smaug/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <ostream>

namespace smaug::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;

struct TrainArgs {
  fs::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<fs::path> out_dir;
};

/// File, then preset, then environment overrides, then command-line flags.
inline ExperimentConfig load_experiment(
    const TrainArgs& args, const std::function<std::optional<std::string>(const std::string&)>& env_lookup = {}) {
  if (!fs::exists(args.config_path)) throw ConfigError("config file not found: " + args.config_path.string());
  ExperimentConfig cfg = parse(read_file(args.config_path), args.config_path.string());
  if (args.preset) apply_preset(cfg, *args.preset);
  apply_env_overrides(cfg, env_lookup);
  if (args.seed) cfg.seeds = {*args.seed};
  if (args.out_dir) cfg.out_dir = args.out_dir->string();
  validate(cfg);
  return cfg;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  trainer::RunResult result;
  double auc = 0.0;
};

inline double population_std(const std::vector<double>& v, double* mean_out = nullptr) {
  double mean = 0.0, var = 0.0;
  if (!v.empty()) {
    double total = 0.0;
    for (double x : v) total += x;
    mean = total / static_cast<double>(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
  }
  if (mean_out) *mean_out = mean;
  return std::sqrt(var);
}

inline std::string summary_json(const ExperimentConfig& cfg, const std::string& preset,
                                const std::vector<SeedOutcome>& outcomes) {
  nlohmann::ordered_json j;
  j["run_id"] = cfg.run_id;
  j["env"] = cfg.env_name;
  j["preset"] = preset;
  std::vector<double> finals;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
  for (const auto& o : outcomes) {
    nlohmann::ordered_json s;
    s["seed"] = o.seed;
    s["status"] = o.ok ? "completed" : "failed";
    if (o.ok) {
      s["final_mean_return"] = o.result.final_eval.mean_return;
      s["final_success_rate"] = o.result.final_eval.success_rate;
      s["final_std_return"] = o.result.final_eval.std_return;
      s["env_steps"] = o.result.env_steps;
      s["episodes"] = o.result.episodes;
      s["train_steps"] = o.result.train_steps;
      s["auc"] = o.auc;
      finals.push_back(o.result.final_eval.mean_return);
    } else {
      s["error"] = o.error;
    }
    seeds.push_back(s);
  }
  double mean = 0.0;
  const double sd = population_std(finals, &mean);
  j["n_completed"] = finals.size();
  j["final_return_mean"] = mean;
  j["final_return_std"] = sd;
  j["seeds"] = seeds;
  return j.dump(2) + "\n";
}

inline SeedOutcome train_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& dir,
                              std::ostream& log) {
  SeedOutcome o;
  o.seed = seed;
  ExperimentConfig seed_cfg = cfg;
  seed_cfg.seeds = {seed};
  fs::create_directories(dir);
  write_file_atomic(dir / "config.cfg", echo(seed_cfg));
  try {
    auto environment = make_env(seed_cfg);
    trainer::TrainConfig tc = seed_cfg.train;
    tc.seed = seed;
    trainer::Learner<float> learner(*environment, tc);
    trainer::RunOptions ro;
    ro.out_dir = dir;
    ro.log = &log;
    o.result = trainer::run_training(learner, ro);
    o.auc = trainer::curve_auc(o.result.curve, static_cast<double>(tc.total_env_steps));
    o.ok = true;
  } catch (const std::exception& e) {
    o.error = e.what();
    write_file_atomic(dir / "error.log", o.error + "\n");
    log << "seed " << seed << " failed: " << o.error << "\n";
  }
  return o;
}

inline int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err,
                     const std::function<std::optional<std::string>(const std::string&)>& env_lookup = {}) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment(args, env_lookup);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  const fs::path root = fs::path(cfg.out_dir) / cfg.run_id;
  std::vector<SeedOutcome> outcomes;
  bool all_ok = true;
  try {
    fs::create_directories(root);
    write_file_atomic(root / "config.cfg", echo(cfg));
    for (auto seed : cfg.seeds) {
      err << "training " << cfg.run_id << " seed " << seed << "\n";
      outcomes.push_back(train_seed(cfg, seed, root / ("seed_" + std::to_string(seed)), err));
      all_ok = all_ok && outcomes.back().ok;
      write_file_atomic(root / "summary.json", summary_json(cfg, args.preset.value_or(""), outcomes));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  double mean = 0.0;
  std::vector<double> finals;
  for (const auto& o : outcomes)
    if (o.ok) finals.push_back(o.result.final_eval.mean_return);
  const double sd = population_std(finals, &mean);
  out << "final_return " << mean << " +- " << sd << " over " << finals.size() << " seeds\n";
  out << "outputs " << root.string() << "\n";
  return all_ok ? kExitOk : kExitFailure;
}

struct LoadedCheckpoint {
  ExperimentConfig cfg;
  std::unique_ptr<env::Environment> environment;
  std::unique_ptr<trainer::SmaugModel<float>> model;
};

/// Loads a checkpoint with the config.cfg stored next to it.
inline LoadedCheckpoint load_checkpoint(const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) throw CheckpointError("checkpoint not found: " + checkpoint.string());
  const auto cfg_path = checkpoint.parent_path() / "config.cfg";
  if (!fs::exists(cfg_path)) throw CheckpointError("no config.cfg next to checkpoint " + checkpoint.string());
  LoadedCheckpoint lc;
  lc.cfg = parse(read_file(cfg_path), cfg_path.string());
  validate(lc.cfg);
  lc.cfg.train.seed = lc.cfg.seeds.front();
  lc.environment = make_env(lc.cfg);
  lc.model = std::make_unique<trainer::SmaugModel<float>>(lc.environment->spec(), lc.cfg.train);
  try {
    trainer::decode_model(*lc.model, read_file(checkpoint));
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint " + checkpoint.string() + " does not match the " + lc.cfg.env_name +
                          " model in " + cfg_path.string() + ": " + e.what());
  }
  return lc;
}

inline int cmd_eval(const fs::path& checkpoint, int episodes, std::ostream& out, std::ostream& err) {
  try {
    if (episodes < 1) throw ConfigError("--episodes must be >= 1");
    auto lc = load_checkpoint(checkpoint);
    env::VectorEnv envs(*lc.environment, static_cast<std::size_t>(lc.cfg.train.n_parallel_envs));
    const auto r = trainer::evaluate(*lc.model, envs, episodes, trainer::eval_seed_base(lc.cfg.train.seed),
                                     lc.cfg.train.rollout_steps(), lc.cfg.train.gamma);
    nlohmann::ordered_json j;
    j["checkpoint"] = checkpoint.string();
    j["episodes"] = episodes;
    j["mean_return"] = r.mean_return;
    j["std_return"] = r.std_return;
    j["success_rate"] = r.success_rate;
    out << j.dump() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

struct DiagnosticsResult {
  std::string diagnostics_csv;
  std::string attention_csv;
  double alignment = 0.0;
  std::size_t samples = 0;
  int clusters = 0;
};

/// Greedy episodes recording attention weights and subtask vectors next to the
/// environment's ground-truth goal, plus the clustering alignment score.
/// n_clusters <= 0 uses the number of distinct goals seen.
inline DiagnosticsResult run_diagnostics(trainer::SmaugModel<float>& model, const env::Environment& prototype,
                                         int n_clusters, int episodes, std::uint64_t seed_base, int n_f_step,
                                         double gamma, std::size_t n_envs = 8) {
  const int W = model.n_window(), D = model.z_dim(), heads = model.agent.config.n_heads;
  const int n = prototype.spec().n_agents;
  DiagnosticsResult out;
  std::ostringstream diag, attn;
  diag << "t,agent,goal_id";
  for (int k = 1; k <= W; ++k) diag << ",alpha_" << k;
  for (int d = 0; d < D; ++d) diag << ",z_" << d;
  diag << '\n';
  attn << "episode,t,agent,head";
  for (int k = 1; k <= W; ++k) attn << ",alpha_" << k;
  attn << ",argmax_window\n";

  std::vector<std::vector<double>> zs;
  std::vector<int> goals;
  env::VectorEnv envs(prototype, n_envs);
  trainer::CollectOptions co;
  co.n_f_step = n_f_step;
  co.gamma = gamma;
  co.record_attention = true;
  Rng unused(0);
  int done = 0;
  while (done < episodes) {
    const auto count = static_cast<std::size_t>(std::min<int>(episodes - done, static_cast<int>(n_envs)));
    std::vector<std::uint64_t> seeds;
    for (std::size_t k = 0; k < count; ++k) seeds.push_back(seed_base + static_cast<std::uint64_t>(done) + k);
    const auto eps = trainer::collect_episodes(model, envs, count, seeds, co, unused);
    for (std::size_t e = 0; e < eps.size(); ++e) {
      const auto& ep = eps[e];
      for (int t = 0; t < ep.length; ++t) {
        const int goal = ep.goal[static_cast<std::size_t>(t)];
        for (int i = 0; i < n; ++i) {
          const float* a = ep.attention.data() + (static_cast<std::size_t>(t) * n + i) * heads * W;
          const float* z = ep.z_at(t, i);
          diag << t << ',' << i << ',' << goal;
          for (int k = 0; k < W; ++k) {
            double mean = 0.0;
            for (int h = 0; h < heads; ++h) mean += a[h * W + k];
            diag << ',' << trainer::format_number(mean / heads);
          }
          for (int d = 0; d < D; ++d) diag << ',' << trainer::format_number(z[d]);
          diag << '\n';
          for (int h = 0; h < heads; ++h) {
            attn << done + static_cast<int>(e) << ',' << t << ',' << i << ',' << h;
            int best = 0;
            for (int k = 0; k < W; ++k) {
              attn << ',' << trainer::format_number(a[h * W + k]);
              if (a[h * W + k] > a[h * W + best]) best = k;
            }
            attn << ',' << best + 1 << '\n';
          }
          if (goal >= 0) {
            zs.emplace_back(z, z + D);
            goals.push_back(goal);
          }
        }
      }
    }
    done += static_cast<int>(count);
  }
  out.diagnostics_csv = diag.str();
  out.attention_csv = attn.str();
  out.samples = zs.size();
  if (n_clusters <= 0) n_clusters = static_cast<int>(std::set<int>(goals.begin(), goals.end()).size());
  out.clusters = n_clusters;
  if (!zs.empty()) out.alignment = alignment_score(zs, goals, n_clusters, seed_base);
  return out;
}

inline int cmd_diagnose(const fs::path& checkpoint, int episodes, std::optional<fs::path> out_dir,
                        std::ostream& out, std::ostream& err) {
  try {
    if (episodes < 1) throw ConfigError("--episodes must be >= 1");
    auto lc = load_checkpoint(checkpoint);
    const int k = lc.cfg.env_name == "switching_goals" ? lc.cfg.grid.n_goal_sites : 0;
    const auto r = run_diagnostics(*lc.model, *lc.environment, k, episodes, trainer::eval_seed_base(lc.cfg.train.seed),
                                   lc.cfg.train.rollout_steps(), lc.cfg.train.gamma,
                                   static_cast<std::size_t>(lc.cfg.train.n_parallel_envs));
    const fs::path dir = out_dir.value_or(checkpoint.parent_path());
    fs::create_directories(dir);
    write_file_atomic(dir / "diagnostics.csv", r.diagnostics_csv);
    write_file_atomic(dir / "attention.csv", r.attention_csv);
    nlohmann::ordered_json j;
    j["checkpoint"] = checkpoint.string();
    j["episodes"] = episodes;
    j["samples"] = r.samples;
    j["clusters"] = r.clusters;
    j["alignment_ami"] = r.samples ? nlohmann::ordered_json(r.alignment) : nlohmann::ordered_json(nullptr);
    write_file_atomic(dir / "diagnostics.json", j.dump(2) + "\n");
    out << j.dump() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

inline int cmd_gradcheck(std::ostream& out) {
  bool ok = true;
  for (const auto& c : run_gradcheck_suite()) {
    ok = ok && c.report.passed;
    out << (c.report.passed ? "PASS " : "FAIL ") << std::left << std::setw(28) << c.name << " max_rel_error "
        << c.report.max_rel_error << " checked " << c.report.checked;
    if (!c.report.passed)
      out << " worst " << c.report.worst_parameter << " analytic " << c.report.worst_analytic << " numeric "
          << c.report.worst_numeric;
    out << "\n";
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace smaug::cli
