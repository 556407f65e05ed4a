#include "smaug/env/chain.hpp"
#include "smaug/env/matrix_game.hpp"
#include "smaug/env/switching_goals.hpp"
#include "smaug/env/trace.hpp"
#include "smaug/env/vector_env.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <sstream>

using namespace smaug::env;

namespace {

std::vector<int> random_available(const std::vector<ActionMask>& masks, std::mt19937_64& rng) {
  std::vector<int> acts;
  for (const auto& m : masks) {
    std::vector<int> ok;
    for (std::size_t a = 0; a < m.size(); ++a)
      if (m[a]) ok.push_back(static_cast<int>(a));
    acts.push_back(ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)]);
  }
  return acts;
}

// Greedy move from `from` toward `to` on the grid.
int step_toward(SwitchingGoalsEnv::Cell from, SwitchingGoalsEnv::Cell to) {
  if (from.row > to.row) return SwitchingGoalsEnv::kUp;
  if (from.row < to.row) return SwitchingGoalsEnv::kDown;
  if (from.col > to.col) return SwitchingGoalsEnv::kLeft;
  if (from.col < to.col) return SwitchingGoalsEnv::kRight;
  return SwitchingGoalsEnv::kStay;
}

// Independent backward-induction value for deterministic tabular games.
double dp_value(const TabularGameSpec& g, int state, int t, double gamma) {
  if (state < 0 || t >= g.horizon) return 0.0;
  double best = -1e300;
  for (int j = 0; j < g.n_joint(); ++j) {
    const double v = g.payoff[state][j] + gamma * dp_value(g, g.next_state[state][j], t + 1, gamma);
    best = std::max(best, v);
  }
  return best;
}

}  // namespace

TEST(SwitchingGoals, ResetIsDeterministicPerSeed) {
  SwitchingGoalsEnv a, b;
  const auto ra = a.reset(0);
  const auto rb = b.reset(0);
  EXPECT_EQ(ra.observations, rb.observations);
  EXPECT_EQ(ra.state, rb.state);
  EXPECT_EQ(ra.available_actions, rb.available_actions);
}

TEST(SwitchingGoals, ShapesMatchSpec) {
  SwitchingGoalsEnv env;
  const auto r = env.reset(3);
  ASSERT_EQ(static_cast<int>(r.observations.size()), env.spec().n_agents);
  for (const auto& o : r.observations) EXPECT_EQ(static_cast<int>(o.size()), env.spec().obs_dim);
  EXPECT_EQ(static_cast<int>(r.state.size()), env.spec().state_dim);
  EXPECT_EQ(env.spec().n_actions, 5);
}

TEST(SwitchingGoals, DifferentSeedsGiveDifferentLayouts) {
  SwitchingGoalsEnv a, b;
  int differing = 0;
  for (std::uint64_t s = 0; s < 100; ++s)
    differing += a.reset(2 * s).state != b.reset(2 * s + 1).state;
  EXPECT_GE(differing, 99);
}

TEST(SwitchingGoals, InertStepCostsStepPenalty) {
  SwitchingGoalsEnv env;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    env.reset(seed);
    const auto active = env.site_cells()[static_cast<std::size_t>(env.ground_truth_subtask())];
    bool occupied = false;
    for (const auto& a : env.agent_cells()) occupied = occupied || a == active;
    if (occupied) continue;
    const auto r = env.step({0, 0, 0});
    EXPECT_DOUBLE_EQ(r.reward, 3 * env.config().step_penalty);
    EXPECT_FALSE(r.terminated);
    EXPECT_FALSE(r.truncated);
    return;
  }
  FAIL() << "no seed with an unoccupied active site";
}

TEST(SwitchingGoals, ScriptedCaptureIssuesRewardAndSwitchesGoal) {
  SwitchingGoalsConfig cfg;
  cfg.switch_interval_min = cfg.switch_interval_max = 1000;
  SwitchingGoalsEnv env(cfg);
  env.reset(7);
  const int goal = env.ground_truth_subtask();
  const auto target = env.site_cells()[static_cast<std::size_t>(goal)];
  StepResult r;
  for (int t = 0; t < 20; ++t) {
    std::vector<int> acts;
    for (const auto& a : env.agent_cells()) acts.push_back(step_toward(a, target));
    r = env.step(acts);
    if (env.captures() > 0) break;
  }
  ASSERT_EQ(env.captures(), 1);
  EXPECT_DOUBLE_EQ(r.reward, cfg.capture_reward + 3 * (cfg.presence_reward + cfg.step_penalty));
  EXPECT_NE(env.ground_truth_subtask(), goal);
}

TEST(SwitchingGoals, TruncatesAtEpisodeLimit) {
  SwitchingGoalsConfig cfg;
  cfg.episode_limit = 4;
  SwitchingGoalsEnv env(cfg);
  env.reset(1);
  StepResult r;
  for (int t = 0; t < 4; ++t) {
    EXPECT_FALSE(r.truncated);
    r = env.step({0, 0, 0});
  }
  EXPECT_TRUE(r.truncated);
  EXPECT_THROW(env.step({0, 0, 0}), ContractViolation);
}

TEST(SwitchingGoals, UnavailableActionIsContractViolation) {
  SwitchingGoalsEnv env;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto start = env.reset(seed);
    for (std::size_t i = 0; i < start.available_actions.size(); ++i) {
      const auto& m = start.available_actions[i];
      for (int a = 0; a < 5; ++a)
        if (!m[static_cast<std::size_t>(a)]) {
          std::vector<int> acts(3, 0);
          acts[i] = a;
          EXPECT_THROW(env.step(acts), ContractViolation);
          return;
        }
    }
  }
  FAIL() << "no agent started on a wall";
}

TEST(SwitchingGoals, WrongArityIsContractViolation) {
  SwitchingGoalsEnv env;
  env.reset(0);
  EXPECT_THROW(env.step({0, 0}), ContractViolation);
  EXPECT_THROW(env.step({0, 0, 9}), ContractViolation);
}

TEST(SwitchingGoals, SeedAndActionsDetermineEverything) {
  auto run = [](std::uint64_t seed) {
    SwitchingGoalsEnv env;
    std::mt19937_64 rng(seed * 31 + 1);
    std::vector<double> trace;
    auto s = env.reset(seed);
    auto masks = s.available_actions;
    for (int t = 0; t < 60; ++t) {
      auto r = env.step(random_available(masks, rng));
      trace.push_back(r.reward);
      for (const auto& o : r.next_observations) trace.insert(trace.end(), o.begin(), o.end());
      trace.insert(trace.end(), r.global_state.begin(), r.global_state.end());
      masks = r.available_actions;
    }
    return trace;
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_EQ(run(seed), run(seed));
}

TEST(SwitchingGoals, InvariantsUnderRandomPlay) {
  SwitchingGoalsEnv env;
  std::mt19937_64 rng(99);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = env.reset(seed);
    auto masks = s.available_actions;
    double ret = 0.0;
    for (int t = 0; t < env.spec().episode_limit; ++t) {
      auto r = env.step(random_available(masks, rng));
      EXPECT_LE(r.reward, env.max_step_reward() + 1e-12);
      EXPECT_GE(r.reward, env.min_step_reward() - 1e-12);
      ret += r.reward;
      for (const auto& o : r.next_observations)
        for (float v : o) {
          EXPECT_GE(v, -1.0f);
          EXPECT_LE(v, 1.0f);
        }
      for (const auto& m : r.available_actions) {
        EXPECT_TRUE(m[0]);
      }
      masks = r.available_actions;
    }
    EXPECT_LE(ret, env.spec().episode_limit * env.max_step_reward());
    // episode length 60 > max switch interval 15
    EXPECT_GE(env.switches(), 1);
  }
}

TEST(SwitchingGoals, RejectsBadConfig) {
  SwitchingGoalsConfig cfg;
  cfg.n_goal_sites = 1;
  EXPECT_THROW(SwitchingGoalsEnv{cfg}, std::invalid_argument);
  cfg = {};
  cfg.switch_interval_min = 0;
  EXPECT_THROW(SwitchingGoalsEnv{cfg}, std::invalid_argument);
}

TEST(MatrixGameOracle, SingleStepMax) {
  const auto g = one_step_game(2, 3, {1, 2, 3, 4, 8, 0, -1, 5, 2});
  EXPECT_DOUBLE_EQ(matrix_game_oracle(g), 8.0);
}

TEST(MatrixGameOracle, TwoStepGeometricSum) {
  TabularGameSpec g;
  g.n_agents = 2;
  g.n_actions = 2;
  g.n_states = 2;
  g.horizon = 2;
  g.payoff = {{1, 8, 2, 0}, {0, 3, 8, 1}};
  g.next_state = {{1, 1, 1, 1}, {-1, -1, -1, -1}};
  EXPECT_NEAR(matrix_game_oracle(g, 0.99), 15.92, 1e-12);
}

TEST(MatrixGameOracle, RandomGameMatchesBackwardInduction) {
  const auto g = random_two_step_game(2, 3, 0);
  const double enumerated = matrix_game_oracle(g, 0.99);
  EXPECT_NEAR(enumerated, dp_value(g, g.start_state, 0, 0.99), 1e-12);
  EXPECT_NEAR(enumerated, 17.318144882222619, 1e-9);  // frozen fixture
}

TEST(MatrixGameOracle, TwoStepCooperativeGame) {
  const auto g = two_step_game();
  EXPECT_DOUBLE_EQ(matrix_game_oracle(g, 1.0), 8.0);
  EXPECT_NEAR(matrix_game_oracle(g, 0.99), 7.92, 1e-12);
}

TEST(MatrixGameOracle, RefusesLargeGames) {
  EXPECT_THROW(matrix_game_oracle(random_two_step_game(4, 2, 0)), std::invalid_argument);
  EXPECT_THROW(matrix_game_oracle(random_two_step_game(2, 6, 0)), std::invalid_argument);
  auto big = random_two_step_game(3, 5, 0);
  big.horizon = 3;
  for (auto& row : big.next_state)
    for (auto& n : row) n = 1;
  EXPECT_THROW(matrix_game_oracle(big), std::invalid_argument);
}

TEST(MatrixGameEnv, OptimalScriptReachesOracle) {
  MatrixGameEnv env(two_step_game());
  env.reset(0);
  auto r1 = env.step({1, 0});
  EXPECT_FALSE(r1.terminated);
  auto r2 = env.step({1, 1});
  EXPECT_TRUE(r2.terminated);
  EXPECT_DOUBLE_EQ(r1.reward + r2.reward, 8.0);
  EXPECT_TRUE(env.episode_success());
  EXPECT_THROW(env.step({0, 0}), ContractViolation);
}

TEST(VectorEnv, SingleInstanceMatchesPlainEnv) {
  SwitchingGoalsEnv plain;
  VectorEnv vec(SwitchingGoalsEnv{}, 1);
  auto a = plain.reset(5);
  auto b = vec.reset({5});
  EXPECT_EQ(a.observations, b[0].observations);
  std::mt19937_64 rng(1);
  auto masks = a.available_actions;
  for (int t = 0; t < 30; ++t) {
    auto acts = random_available(masks, rng);
    auto ra = plain.step(acts);
    auto rb = vec.step({acts}).results[0];
    EXPECT_EQ(ra.next_observations, rb.next_observations);
    EXPECT_EQ(ra.reward, rb.reward);
    masks = ra.available_actions;
  }
}

TEST(VectorEnv, MatchesSequentialEnvs) {
  constexpr std::size_t E = 8;
  VectorEnv vec(SwitchingGoalsEnv{}, E);
  std::vector<SwitchingGoalsEnv> seq(E);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < E; ++i) seeds.push_back(100 + i);
  auto starts = vec.reset(seeds);
  std::vector<std::vector<ActionMask>> masks;
  for (std::size_t i = 0; i < E; ++i) {
    EXPECT_EQ(seq[i].reset(seeds[i]).state, starts[i].state);
    masks.push_back(starts[i].available_actions);
  }
  std::mt19937_64 rng(3);
  for (int t = 0; t < 60; ++t) {
    std::vector<std::vector<int>> acts;
    for (std::size_t i = 0; i < E; ++i) acts.push_back(random_available(masks[i], rng));
    auto out = vec.step(acts, false);
    for (std::size_t i = 0; i < E; ++i) {
      auto r = seq[i].step(acts[i]);
      EXPECT_EQ(r.global_state, out.results[i].global_state);
      EXPECT_EQ(r.reward, out.results[i].reward);
      masks[i] = r.available_actions;
    }
  }
}

TEST(VectorEnv, InstancesAutoResetIndependently) {
  std::vector<std::unique_ptr<Environment>> envs;
  envs.push_back(std::make_unique<ChainEnv>(ChainConfig{6, 1, 3}));
  envs.push_back(std::make_unique<ChainEnv>(ChainConfig{6, 1, 5}));
  VectorEnv vec(std::move(envs));
  vec.reset({1, 2});
  std::vector<int> resets_at_0, resets_at_1;
  for (int t = 1; t <= 15; ++t) {
    auto out = vec.step({{0}, {0}});
    ASSERT_EQ(out.results.size(), 2u);
    ASSERT_EQ(out.resets.size(), 2u);
    if (out.resets[0]) {
      EXPECT_EQ(out.resets[0]->observations.size(), 1u);
      resets_at_0.push_back(t);
    }
    if (out.resets[1]) resets_at_1.push_back(t);
  }
  EXPECT_EQ(resets_at_0, (std::vector<int>{3, 6, 9, 12, 15}));
  EXPECT_EQ(resets_at_1, (std::vector<int>{5, 10, 15}));
}

TEST(VectorEnv, ErrorsNameTheInstance) {
  VectorEnv vec(MatrixGameEnv(two_step_game()), 3);
  vec.reset({0, 0, 0});
  try {
    vec.step({{0, 0}, {0, 7}, {0, 0}});
    FAIL() << "expected ContractViolation";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("instance 1"), std::string::npos) << e.what();
  }
}

TEST(Trace, OneJsonRecordPerStep) {
  SwitchingGoalsConfig cfg;
  cfg.episode_limit = 5;
  SwitchingGoalsEnv env(cfg);
  std::ostringstream os;
  record_episode(env, 0, [](const auto&, const auto&) { return std::vector<int>{0, 0, 0}; }, os);
  std::istringstream is(os.str());
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["step"].get<int>(), n);
    EXPECT_EQ(j["actions"].size(), 3u);
    EXPECT_EQ(j["observations"].size(), 3u);
    EXPECT_TRUE(j.contains("state"));
    EXPECT_EQ(j["truncated"].get<bool>(), n == 4);
    ++n;
  }
  EXPECT_EQ(n, 5);
}
