// Experiment configuration: flat `section.key = value` text, ablation
// presets, environment-variable overrides and a canonical echo.

#pragma once

#include "smaug/env/chain.hpp"
#include "smaug/env/matrix_game.hpp"
#include "smaug/env/switching_goals.hpp"
#include "smaug/trainer/config.hpp"

#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace smaug::cli {

/// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kEnvPrefix = "SMAUG_";

struct ExperimentConfig {
  std::string env_name;
  env::SwitchingGoalsConfig grid;
  env::ChainConfig chain;
  trainer::TrainConfig train;
  std::string run_id = "smaug";
  std::string out_dir = "runs";
  std::vector<std::uint64_t> seeds{0};
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename I>
I parse_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    if (x < static_cast<long long>(std::numeric_limits<I>::min()) ||
        static_cast<unsigned long long>(x) > static_cast<unsigned long long>(std::numeric_limits<I>::max()))
      throw std::out_of_range(v);
    return static_cast<I>(x);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

/// One configurable key with its text accessors.
struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

/// Every accepted key, in echo order.
inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    using C = ExperimentConfig;
    auto str = [&](const std::string& key, std::string C::*m) {
      f.push_back({key, [m](const C& c) { return c.*m; }, [m](C& c, const std::string& v) { c.*m = v; }});
    };
    auto integer = [&](const std::string& key, auto accessor) {
      f.push_back({key, [accessor](const C& c) { return std::to_string(accessor(const_cast<C&>(c))); },
                   [accessor, key](C& c, const std::string& v) {
                     auto& ref = accessor(c);
                     ref = detail::parse_integer<std::remove_reference_t<decltype(ref)>>(key, v);
                   }});
    };
    auto real = [&](const std::string& key, auto accessor) {
      f.push_back({key, [accessor](const C& c) { return detail::format_double(accessor(const_cast<C&>(c))); },
                   [accessor, key](C& c, const std::string& v) { accessor(c) = detail::parse_double(key, v); }});
    };
    auto boolean = [&](const std::string& key, auto accessor) {
      f.push_back({key, [accessor](const C& c) { return std::string(accessor(const_cast<C&>(c)) ? "true" : "false"); },
                   [accessor, key](C& c, const std::string& v) { accessor(c) = detail::parse_bool(key, v); }});
    };
#define SMAUG_REF(expr) [](C & c) -> auto& { return c.expr; }
    str("env.name", &C::env_name);
    integer("env.grid_size", SMAUG_REF(grid.grid_size));
    integer("env.n_agents", SMAUG_REF(grid.n_agents));
    integer("env.n_goal_sites", SMAUG_REF(grid.n_goal_sites));
    integer("env.switch_interval_min", SMAUG_REF(grid.switch_interval_min));
    integer("env.switch_interval_max", SMAUG_REF(grid.switch_interval_max));
    real("env.capture_reward", SMAUG_REF(grid.capture_reward));
    real("env.step_penalty", SMAUG_REF(grid.step_penalty));
    real("env.presence_reward", SMAUG_REF(grid.presence_reward));
    integer("env.episode_limit", SMAUG_REF(grid.episode_limit));
    integer("env.view_radius", SMAUG_REF(grid.view_radius));
    integer("env.chain_length", SMAUG_REF(chain.length));
    integer("env.chain_agents", SMAUG_REF(chain.n_agents));
    integer("env.chain_episode_limit", SMAUG_REF(chain.episode_limit));

    integer("train.n_parallel_envs", SMAUG_REF(train.n_parallel_envs));
    integer("train.total_env_steps", SMAUG_REF(train.total_env_steps));
    real("train.epsilon_start", SMAUG_REF(train.epsilon_start));
    real("train.epsilon_end", SMAUG_REF(train.epsilon_end));
    real("train.epsilon_anneal_steps", SMAUG_REF(train.epsilon_anneal_steps));
    integer("train.buffer_capacity", SMAUG_REF(train.buffer_capacity));
    integer("train.batch_size", SMAUG_REF(train.batch_size));
    integer("train.inference_buffer_capacity", SMAUG_REF(train.inference_buffer_capacity));
    integer("train.inference_batch_size", SMAUG_REF(train.inference_batch_size));
    integer("train.train_steps_per_round", SMAUG_REF(train.train_steps_per_round));
    integer("train.target_update_episodes", SMAUG_REF(train.target_update_episodes));
    real("train.lr", SMAUG_REF(train.learning_rate));
    real("train.rms_alpha", SMAUG_REF(train.rms_alpha));
    real("train.rms_epsilon", SMAUG_REF(train.rms_epsilon));
    real("train.grad_clip", SMAUG_REF(train.grad_clip));
    real("train.gamma", SMAUG_REF(train.gamma));
    real("train.beta_mi", SMAUG_REF(train.beta_mi));
    real("train.beta1", SMAUG_REF(train.beta1));
    real("train.beta2", SMAUG_REF(train.beta2));
    real("train.beta_f", SMAUG_REF(train.beta_f));
    real("train.beta_o", SMAUG_REF(train.beta_o));
    real("train.beta_r", SMAUG_REF(train.beta_r));
    integer("train.eval_interval", SMAUG_REF(train.eval_interval));
    integer("train.eval_episodes", SMAUG_REF(train.eval_episodes));
    integer("train.checkpoint_interval", SMAUG_REF(train.checkpoint_interval));

    integer("model.n_window", SMAUG_REF(train.n_window));
    integer("model.n_f_step", SMAUG_REF(train.n_f_step));
    integer("model.hidden_dim", SMAUG_REF(train.hidden_dim));
    integer("model.segment_hidden_dim", SMAUG_REF(train.segment_hidden_dim));
    integer("model.z_dim", SMAUG_REF(train.z_dim));
    integer("model.n_heads", SMAUG_REF(train.n_heads));
    real("model.attention_temperature", SMAUG_REF(train.attention_temperature));
    boolean("model.per_window_segment_gru", SMAUG_REF(train.per_window_segment_gru));
    integer("model.mix_dim", SMAUG_REF(train.mix_dim));
    integer("model.hyper_hidden", SMAUG_REF(train.hyper_hidden));
    integer("model.variational_hidden", SMAUG_REF(train.variational_hidden));
    integer("model.inference_hidden", SMAUG_REF(train.inference_hidden));
    integer("model.inference_embed", SMAUG_REF(train.inference_embed));

    boolean("ablation.disable_window", SMAUG_REF(train.disable_window));
    boolean("ablation.disable_intrinsic", SMAUG_REF(train.disable_intrinsic));
    boolean("ablation.disable_inference", SMAUG_REF(train.disable_inference));
    boolean("ablation.disable_mixer", SMAUG_REF(train.disable_mixer));

    str("run.id", &C::run_id);
    str("run.out_dir", &C::out_dir);
#undef SMAUG_REF
    f.push_back({"run.seeds",
                 [](const C& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
                   return s;
                 },
                 [](C& c, const std::string& v) {
                   c.seeds.clear();
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ','))
                     c.seeds.push_back(detail::parse_integer<std::uint64_t>("run.seeds", detail::trim(item)));
                 }});
    return f;
  }();
  return table;
}

inline const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

inline void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(cfg, value);
}

/// Applies `key = value` lines on top of cfg. '#' starts a comment.
inline void apply_text(ExperimentConfig& cfg, const std::string& text, const std::string& source = "config") {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value', got '" + line + "'");
    const auto key = detail::trim(line.substr(0, eq));
    try {
      set_value(cfg, key, detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

/// SMAUG_<KEY> with '.' written as "__", e.g. SMAUG_TRAIN__LR for train.lr.
inline std::string env_var_name(const std::string& key) {
  std::string out = kEnvPrefix;
  for (char c : key) {
    if (c == '.')
      out += "__";
    else
      out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Applies overrides from the process environment; `lookup` defaults to getenv.
inline void apply_env_overrides(ExperimentConfig& cfg,
                                const std::function<std::optional<std::string>(const std::string&)>& lookup = {}) {
  for (const auto& f : fields()) {
    const auto name = env_var_name(f.key);
    std::optional<std::string> v;
    if (lookup) {
      v = lookup(name);
    } else if (const char* raw = std::getenv(name.c_str())) {
      v = raw;
    }
    if (!v) continue;
    try {
      f.set(cfg, detail::trim(*v));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("environment ") + name + ": " + e.what());
    }
  }
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"full",         "qmix-ablation", "iql-ablation",
                                              "no-window",    "no-intrinsic",  "no-inference"};
  return names;
}

inline void apply_preset(ExperimentConfig& cfg, const std::string& name) {
  auto& t = cfg.train;
  if (name == "full") {
    t.disable_window = t.disable_intrinsic = t.disable_inference = t.disable_mixer = false;
  } else if (name == "qmix-ablation" || name == "iql-ablation") {
    t.beta_mi = 0.0;
    t.n_f_step = 0;
    t.n_window = 1;
    t.disable_mixer = name == "iql-ablation";
  } else if (name == "no-window") {
    t.disable_window = true;
  } else if (name == "no-intrinsic") {
    t.disable_intrinsic = true;
  } else if (name == "no-inference") {
    t.disable_inference = true;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
}

inline const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"switching_goals", "two_step_game", "chain"};
  return names;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.env_name.empty()) throw ConfigError("env.name: required field is missing");
  bool known = false;
  for (const auto& n : env_names()) known = known || n == cfg.env_name;
  if (!known) throw ConfigError("env.name: unknown environment '" + cfg.env_name + "'");
  if (cfg.seeds.empty()) throw ConfigError("run.seeds: at least one seed is required");
  if (cfg.run_id.empty()) throw ConfigError("run.id: must not be empty");
  try {
    cfg.train.validate();
    if (cfg.env_name == "switching_goals") cfg.grid.validate();
    if (cfg.env_name == "chain") {
      if (cfg.chain.length < 2) throw std::invalid_argument("env.chain_length must be >= 2");
      if (cfg.chain.n_agents < 1) throw std::invalid_argument("env.chain_agents must be >= 1");
      if (cfg.chain.episode_limit < 1) throw std::invalid_argument("env.chain_episode_limit must be >= 1");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline std::unique_ptr<env::Environment> make_env(const ExperimentConfig& cfg) {
  if (cfg.env_name == "switching_goals") return std::make_unique<env::SwitchingGoalsEnv>(cfg.grid);
  if (cfg.env_name == "two_step_game")
    return std::make_unique<env::MatrixGameEnv>(env::two_step_game(cfg.train.gamma));
  if (cfg.env_name == "chain") return std::make_unique<env::ChainEnv>(cfg.chain);
  throw ConfigError("env.name: unknown environment '" + cfg.env_name + "'");
}

/// Canonical text holding every key; parsing it reproduces cfg exactly.
inline std::string echo(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) out += '\n';
      section = s;
    }
    out += f.key + " = " + f.get(cfg) + '\n';
  }
  return out;
}

inline ExperimentConfig parse(const std::string& text, const std::string& source = "config") {
  ExperimentConfig cfg;
  apply_text(cfg, text, source);
  return cfg;
}

}  // namespace smaug::cli
