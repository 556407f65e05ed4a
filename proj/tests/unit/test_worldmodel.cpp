#include "smaug/env/chain.hpp"
#include "smaug/numerics/gradcheck.hpp"
#include "smaug/numerics/optim.hpp"
#include "smaug/worldmodel.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace smaug;
using namespace smaug::worldmodel;

namespace {

InferenceNet<double> seeded_net(std::uint64_t seed, int obs = 4, int actions = 3) {
  InferenceNet<double> net({obs, actions, 8, 5});
  Rng rng(seed);
  net.init(rng);
  return net;
}

std::vector<double> dense(const DenseLayer<double>& l, const std::vector<double>& x, bool relu) {
  std::vector<double> y(l.out_dim());
  for (std::size_t o = 0; o < y.size(); ++o) {
    double s = l.bias.value(0, static_cast<Eigen::Index>(o));
    for (std::size_t i = 0; i < x.size(); ++i)
      s += l.weight.value(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * x[i];
    y[o] = relu ? std::max(0.0, s) : s;
  }
  return y;
}

// Stateless greedy stand-in that records every call it receives.
struct RecordingPolicy {
  int extends = 0;
  std::vector<int> act(const Matrix<double>& obs) const {
    std::vector<int> a;
    for (Eigen::Index r = 0; r < obs.rows(); ++r) {
      Eigen::Index best = 0;
      obs.row(r).maxCoeff(&best);
      a.push_back(static_cast<int>(best % 3));
    }
    return a;
  }
  void extend(const Matrix<double>&, const std::vector<int>&) { ++extends; }
};

// Policy whose choice depends on how many steps it has seen.
struct CountingPolicy {
  int seen = 0;
  std::vector<int> act(const Matrix<double>& obs) const {
    return std::vector<int>(static_cast<std::size_t>(obs.rows()), seen % 3);
  }
  void extend(const Matrix<double>&, const std::vector<int>&) { ++seen; }
};

struct ChainData {
  Matrix<float> inputs, next_obs, rewards;
};

ChainData chain_transitions(const env::ChainEnv& chain, int length) {
  ChainData d;
  d.inputs = Matrix<float>::Zero(length * 3, length + 3);
  d.next_obs = Matrix<float>::Zero(length * 3, length);
  d.rewards = Matrix<float>::Zero(length * 3, 1);
  for (int p = 0; p < length; ++p)
    for (int a = 0; a < 3; ++a) {
      const int r = p * 3 + a;
      d.inputs(r, p) = 1;
      d.inputs(r, length + a) = 1;
      const int next = chain.next_position(p, a);
      d.next_obs(r, next) = 1;
      d.rewards(r, 0) = static_cast<float>(chain.reward_for(next));
    }
  return d;
}

// Trains on every chain transition and returns the one-step obs MSE at each
// update count listed in `checkpoints`.
std::vector<double> train_chain(std::uint64_t seed, int updates, const std::vector<int>& checkpoints,
                                InferenceNet<float>* out = nullptr) {
  env::ChainEnv chain({6, 1, 12});
  const auto data = chain_transitions(chain, 6);
  InferenceNet<float> net({6, 3, 64, 32});
  Rng rng(seed);
  net.init(rng);
  ParameterList<float> params;
  params.add_all("", net);
  RmsPropState<float> opt;
  std::vector<double> curve;
  for (int u = 1; u <= updates; ++u) {
    Tape<float> tape;
    const auto l = inference_loss(tape, net, data.inputs, data.next_obs, data.rewards, 1.0f, 1.0f);
    tape.backward(l.loss);
    clip_grad_norm(params, 10.0f);
    opt.step(params);
    if (std::find(checkpoints.begin(), checkpoints.end(), u) != checkpoints.end()) {
      Tape<float> eval;
      curve.push_back(inference_loss(eval, net, data.inputs, data.next_obs, data.rewards, 1.0f, 1.0f).obs_mse);
    }
  }
  if (out) *out = net;
  return curve;
}

}  // namespace

TEST(PredictStep, ZeroWeightsGiveDecoderBiases) {
  auto net = seeded_net(0);
  net.visit_parameters([](const std::string& name, Tensor<double>& t) {
    if (name.ends_with("weight")) t.value.setZero();
  });
  const auto p = predict_step(net, Matrix<double>::Random(2, 4), {0, 2});
  for (Eigen::Index r = 0; r < 2; ++r) {
    EXPECT_EQ(p.next_obs.row(r), net.obs_dec2.bias.value.row(0));
    EXPECT_EQ(p.reward[static_cast<std::size_t>(r)], net.rew_dec2.bias.value(0, 0));
  }
}

TEST(PredictStep, Deterministic) {
  auto net = seeded_net(1);
  Matrix<double> o = Matrix<double>::Random(3, 4);
  const auto a = predict_step(net, o, {0, 1, 2});
  const auto b = predict_step(net, o, {0, 1, 2});
  EXPECT_EQ(a.next_obs, b.next_obs);
  EXPECT_EQ(a.reward, b.reward);
}

TEST(PredictStep, MatchesLayerByLayerEvaluation) {
  auto net = seeded_net(0);
  Matrix<double> o = Matrix<double>::Random(1, 4);
  const auto p = predict_step(net, o, {1});
  std::vector<double> x{o(0, 0), o(0, 1), o(0, 2), o(0, 3), 0, 1, 0};
  const auto e = dense(net.enc2, dense(net.enc1, x, true), true);
  const auto fo = dense(net.obs_dec2, dense(net.obs_dec1, e, true), false);
  const auto fr = dense(net.rew_dec2, dense(net.rew_dec1, e, true), false);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(p.next_obs(0, i), fo[static_cast<std::size_t>(i)], 1e-12);
  EXPECT_NEAR(p.reward[0], fr[0], 1e-12);
}

TEST(PredictStep, RejectsBadAction) {
  auto net = seeded_net(0);
  EXPECT_THROW(predict_step(net, Matrix<double>::Random(1, 4), {3}), ArgumentError);
  EXPECT_THROW(predict_step(net, Matrix<double>::Random(1, 5), {0}), DimensionError);
}

TEST(FutureReward, Examples) {
  EXPECT_EQ(future_reward({}, 0.99), 0.0);
  EXPECT_NEAR(future_reward({1, 1, 1}, 0.99), 2.9701, 1e-12);
  EXPECT_NEAR(future_reward({1, 1}, 0.99), 1.99, 1e-12);
}

TEST(FutureReward, MatchesNestedForm) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r(static_cast<std::size_t>(trial % 6));
    for (auto& v : r) v = u(rng);
    double nested = 0.0;
    for (auto it = r.rbegin(); it != r.rend(); ++it) nested = *it + 0.97 * nested;
    EXPECT_NEAR(future_reward(r, 0.97), nested, 1e-9);
  }
}

TEST(Rollout, ZeroStepsIsEmpty) {
  auto net = seeded_net(0);
  RecordingPolicy policy;
  const auto r = rollout(net, policy, Matrix<double>::Random(4, 4), 2, 0, 0.99);
  EXPECT_TRUE(r.predicted_obs.empty());
  EXPECT_EQ(r.future_rewards, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(policy.extends, 0);
}

TEST(Rollout, ConstantRewardGeometricSum) {
  auto net = seeded_net(0);
  net.rew_dec2.weight.value.setZero();
  net.rew_dec2.bias.value(0, 0) = 1.0;
  RecordingPolicy policy;
  const auto r = rollout(net, policy, Matrix<double>::Random(3, 4), 3, 2, 0.99);
  ASSERT_EQ(r.future_rewards.size(), 1u);
  EXPECT_NEAR(r.future_rewards[0], 1.99, 1e-12);
  EXPECT_EQ(policy.extends, 2);
  EXPECT_EQ(r.predicted_obs.size(), 2u);
  EXPECT_EQ(r.actions.size(), 2u);
}

TEST(Rollout, AveragesRewardsPerEnvironment) {
  auto net = seeded_net(3);
  RecordingPolicy policy;
  Matrix<double> o = Matrix<double>::Random(4, 4);
  const auto r = rollout(net, policy, o, 2, 1, 0.99);
  const auto p = predict_step(net, o, policy.act(o));
  ASSERT_EQ(r.rewards[0].size(), 2u);
  EXPECT_NEAR(r.rewards[0][0], (p.reward[0] + p.reward[1]) / 2, 1e-12);
  EXPECT_NEAR(r.rewards[0][1], (p.reward[2] + p.reward[3]) / 2, 1e-12);
}

TEST(Rollout, DiscardedRolloutLeavesBehaviorUnchanged) {
  auto net = seeded_net(4);
  Matrix<double> o = Matrix<double>::Random(2, 4);
  CountingPolicy live, reference;
  for (int step = 0; step < 5; ++step) {
    CountingPolicy scratch = live;
    rollout(net, scratch, o, 2, 3, 0.99);
    EXPECT_EQ(live.act(o), reference.act(o));
    live.extend(o, live.act(o));
    reference.extend(o, reference.act(o));
  }
}

TEST(InferenceLoss, PerfectPredictionIsZero) {
  auto net = seeded_net(5);
  Matrix<double> x = net.encode_inputs(Matrix<double>::Random(3, 4), {0, 1, 2});
  const auto p = predict_step(net, x.leftCols(4), {0, 1, 2});
  Matrix<double> r(3, 1);
  for (int i = 0; i < 3; ++i) r(i, 0) = p.reward[static_cast<std::size_t>(i)];
  Tape<double> tape;
  const auto l = inference_loss(tape, net, x, p.next_obs, r, 1.0, 1.0);
  EXPECT_NEAR(l.loss.scalar(), 0.0, 1e-15);
  EXPECT_NEAR(l.obs_mse, 0.0, 1e-30);
}

TEST(InferenceLoss, MatchesHandFormula) {
  auto net = seeded_net(0);
  Matrix<double> o = Matrix<double>::Random(4, 4), o2 = Matrix<double>::Random(4, 4), r = Matrix<double>::Random(4, 1);
  const std::vector<int> a{2, 0, 1, 1};
  const auto p = predict_step(net, o, a);
  for (double beta_o : {0.0, 1.0, 0.3}) {
    double expect = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) {
      double sq = 0;
      for (Eigen::Index c = 0; c < 4; ++c) sq += std::pow(p.next_obs(i, c) - o2(i, c), 2);
      expect += beta_o * std::sqrt(sq) + 0.7 * std::abs(p.reward[static_cast<std::size_t>(i)] - r(i, 0));
    }
    expect /= 4;
    Tape<double> tape;
    const auto l = inference_loss(tape, net, net.encode_inputs(o, a), o2, r, beta_o, 0.7);
    EXPECT_NEAR(l.loss.scalar(), expect, 1e-6);
    EXPECT_GE(l.loss.scalar(), 0.0);
  }
}

TEST(InferenceLoss, GradientCheck) {
  auto net = seeded_net(6);
  Matrix<double> x = net.encode_inputs(Matrix<double>::Random(5, 4), {0, 1, 2, 0, 1});
  Matrix<double> o2 = Matrix<double>::Random(5, 4), r = Matrix<double>::Random(5, 1);
  ParameterList<double> params;
  params.add_all("", net);
  const auto report =
      grad_check(params, [&](Tape<double>& tape) { return inference_loss(tape, net, x, o2, r, 1.0, 0.5).loss; }, {});
  EXPECT_TRUE(report.passed) << report.worst_parameter << " " << report.max_rel_error;
}

TEST(ChainWorldModel, LearnsTransitionsWithinBudget) {
  const std::vector<int> checkpoints{1, 10, 30, 100, 300, 1000, 5000};
  std::vector<std::vector<double>> curves;
  for (std::uint64_t seed = 0; seed < 5; ++seed) curves.push_back(train_chain(seed, 5000, checkpoints));
  std::vector<double> medians;
  for (std::size_t b = 0; b < checkpoints.size(); ++b) {
    std::vector<double> col;
    for (const auto& c : curves) col.push_back(c[b]);
    std::sort(col.begin(), col.end());
    medians.push_back(col[2]);
  }
  EXPECT_LT(medians.back(), 1e-3);
  // median error never rises while it is above the noise floor
  for (std::size_t b = 1; b < medians.size(); ++b) {
    if (medians[b - 1] > 1e-3) {
      EXPECT_LE(medians[b], medians[b - 1]) << "after " << checkpoints[b] << " updates";
    }
  }
}

TEST(ChainWorldModel, TrainedRolloutTracksTrueChain) {
  InferenceNet<float> net;
  train_chain(0, 5000, {}, &net);
  env::ChainEnv chain({6, 1, 12});
  struct AlwaysRight {
    std::vector<int> act(const Matrix<float>& o) const { return std::vector<int>(static_cast<std::size_t>(o.rows()), 2); }
    void extend(const Matrix<float>&, const std::vector<int>&) {}
  } policy;
  Matrix<float> start = Matrix<float>::Zero(1, 6);
  start(0, 1) = 1;
  const auto r = rollout(net, policy, start, 1, 3, 0.99);
  for (int m = 0; m < 3; ++m) {
    const auto truth = chain.encode(chain.next_position(1 + m, 2));
    double err = 0;
    for (int c = 0; c < 6; ++c) err += std::pow(r.predicted_obs[static_cast<std::size_t>(m)](0, c) - truth[static_cast<std::size_t>(c)], 2);
    EXPECT_LT(err / 6, 1e-3) << "m=" << m;
  }
}
