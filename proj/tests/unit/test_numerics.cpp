#include "smaug/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace smaug;

namespace {

Matrix<double> mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix<double> m(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Dense, IdentityWeights) {
  DenseLayer<double> layer(2, 2);
  layer.weight.value = Matrix<double>::Identity(2, 2);
  Tape<double> tape;
  auto y = layer.forward(tape, tape.constant(mat({{3, 4}})));
  EXPECT_EQ(y.value()(0, 0), 3);
  EXPECT_EQ(y.value()(0, 1), 4);
}

TEST(Dense, ZeroWeightGivesBias) {
  DenseLayer<double> layer(2, 2);
  layer.bias.value = mat({{1, 1}});
  Tape<double> tape;
  auto y = layer.forward(tape, tape.constant(mat({{-7, 2.5}})));
  EXPECT_EQ(y.value(), mat({{1, 1}}));
}

TEST(Dense, HandMatrixMultiply) {
  DenseLayer<double> layer(2, 2);
  layer.weight.value = mat({{1, 2}, {3, 4}});
  layer.bias.value = mat({{0.5, -0.5}});
  Tape<double> tape;
  auto y = layer.forward(tape, tape.constant(mat({{1, 1}})));
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 3.5);
  EXPECT_DOUBLE_EQ(y.value()(0, 1), 6.5);
}

TEST(Dense, ShapeMismatchNamesBothShapes) {
  DenseLayer<double> layer(3, 2);
  Tape<double> tape;
  try {
    layer.forward(tape, tape.constant(mat({{1, 2}})));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1 x 2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2 x 3]"), std::string::npos) << msg;
  }
}

TEST(Gru, ZeroParametersFixedPoint) {
  GruCell<double> cell(3, 4);
  Tape<double> tape;
  auto h = cell.step(tape, tape.constant(mat({{0.3, -0.2, 0.9}})),
                     tape.constant(Matrix<double>::Zero(1, 4)));
  EXPECT_TRUE(h.value().isZero(0));
}

TEST(Gru, SaturatedUpdateGateKeepsState) {
  GruCell<double> cell(2, 3);
  Rng rng(3);
  cell.init(rng);
  cell.b_ih.value.middleCols(3, 3).setConstant(50.0);
  Tape<double> tape;
  const Matrix<double> h0 = mat({{0.2, -0.4, 0.7}});
  auto h = cell.step(tape, tape.constant(mat({{1.0, -1.0}})), tape.constant(h0));
  EXPECT_TRUE(h.value().isApprox(h0, 1e-12));
}

TEST(Gru, MatchesScalarOracle) {
  GruCell<double> cell(1, 1);
  Rng rng(0);
  cell.init(rng);
  const double x = 1.0, h = 0.5;
  const auto& wi = cell.w_ih.value;
  const auto& wh = cell.w_hh.value;
  const auto& bi = cell.b_ih.value;
  const auto& bh = cell.b_hh.value;
  const double r = sigmoid_ref(wi(0, 0) * x + bi(0, 0) + wh(0, 0) * h + bh(0, 0));
  const double u = sigmoid_ref(wi(1, 0) * x + bi(0, 1) + wh(1, 0) * h + bh(0, 1));
  const double n = std::tanh(wi(2, 0) * x + bi(0, 2) + r * (wh(2, 0) * h + bh(0, 2)));
  const double expected = (1 - u) * n + u * h;

  Tape<double> tape;
  auto out = cell.step(tape, tape.constant(mat({{x}})), tape.constant(mat({{h}})));
  EXPECT_NEAR(out.value()(0, 0), expected, 1e-12);
}

TEST(Gru, OutputBoundedWhenStateBounded) {
  GruCell<double> cell(5, 8);
  Rng rng(11);
  cell.init(rng);
  for (int trial = 0; trial < 50; ++trial) {
    Tape<double> tape;
    auto h = cell.step(tape, tape.constant(random_matrix(4, 5, rng, -10, 10)),
                       tape.constant(random_matrix(4, 8, rng, -0.999, 0.999)));
    EXPECT_LT(h.value().cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Gru, MaskedRowsPassThrough) {
  GruCell<double> cell(2, 3);
  Rng rng(5);
  cell.init(rng);
  Tape<double> tape;
  const Matrix<double> h0 = mat({{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}});
  Matrix<double> mask(2, 1);
  mask << 0, 1;
  auto h = cell.step(tape, tape.constant(mat({{1, 2}, {1, 2}})), tape.constant(h0), &mask);
  EXPECT_EQ(h.value().row(0), h0.row(0));
  EXPECT_NE(h.value().row(1), h0.row(1));
}

TEST(Gru, ShapeMismatchThrows) {
  GruCell<double> cell(2, 3);
  Tape<double> tape;
  EXPECT_THROW(cell.step(tape, tape.constant(mat({{1, 2, 3}})), tape.constant(mat({{0, 0, 0}}))),
               DimensionError);
}

TEST(Softmax, Examples) {
  auto a = softmax_rows<double>(mat({{0, 0, 0}}));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a(0, i), 1.0 / 3.0, 1e-12);

  auto b = softmax_rows<double>(mat({{1000, 0}}));
  EXPECT_TRUE(b.allFinite());
  EXPECT_NEAR(b(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(b(0, 1), 0.0, 1e-12);

  auto c = softmax_rows<double>(mat({{1, 2, 3}}));
  EXPECT_NEAR(c(0, 0), 0.09003, 1e-4);
  EXPECT_NEAR(c(0, 1), 0.24473, 1e-4);
  EXPECT_NEAR(c(0, 2), 0.66524, 1e-4);
}

TEST(Softmax, PositiveAndNormalizedOverRandomVectors) {
  Rng rng(0);
  std::uniform_int_distribution<int> dim(1, 64);
  std::uniform_real_distribution<double> scale(0.1, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const int d = dim(rng);
    Matrix<double> x = random_matrix(1, d, rng) * scale(rng);
    auto p = softmax_rows(x);
    EXPECT_NEAR(p.sum(), 1.0, 1e-6);
    EXPECT_GT(p.minCoeff(), 0.0);
  }
}

namespace {

MultiHeadAttention<double> make_attention(std::size_t q_in, std::size_t k_in, std::size_t width,
                                          int heads, std::uint64_t seed) {
  MultiHeadAttention<double> att(q_in, k_in, width, heads);
  Rng rng(seed);
  att.init(rng);
  return att;
}

}  // namespace

TEST(Attention, SingleKeyHasUnitWeight) {
  auto att = make_attention(6, 5, 8, 4, 0);
  Rng rng(1);
  Tape<double> tape;
  auto q = tape.constant(random_matrix(1, 6, rng));
  auto v = tape.constant(random_matrix(1, 5, rng));
  auto res = att.forward(tape, q, {v}, {v});
  for (int h = 0; h < 4; ++h) EXPECT_EQ(res.weights(0, h), 1.0);
  const Matrix<double> expected = v.value() * att.w_v.value.transpose();
  EXPECT_TRUE(res.output.value().isApprox(expected, 1e-12));
}

TEST(Attention, IdenticalKeysGiveUniformWeights) {
  auto att = make_attention(6, 5, 8, 2, 7);
  Rng rng(2);
  for (int K = 1; K <= 10; ++K) {
    Tape<double> tape;
    auto q = tape.constant(random_matrix(3, 6, rng));
    auto k = tape.constant(random_matrix(3, 5, rng));
    std::vector<Var<double>> keys(static_cast<std::size_t>(K), k);
    auto res = att.forward(tape, q, keys, keys);
    EXPECT_NEAR((res.weights.array() - 1.0 / K).abs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(Attention, MatchesDirectFormula) {
  auto att = make_attention(4, 3, 4, 2, 0);
  Rng rng(0);
  const Matrix<double> query = random_matrix(1, 4, rng);
  std::vector<Matrix<double>> src;
  for (int k = 0; k < 3; ++k) src.push_back(random_matrix(1, 3, rng));

  // direct evaluation: project, dot per head, softmax, weighted sum
  const Matrix<double> q = query * att.w_q.value.transpose();
  Matrix<double> expected_out = Matrix<double>::Zero(1, 4);
  double expected_alpha[2][3];
  for (int h = 0; h < 2; ++h) {
    double s[3], z = 0;
    for (int k = 0; k < 3; ++k) {
      const Matrix<double> key = src[k] * att.w_k.value.transpose();
      s[k] = std::exp(q(0, 2 * h) * key(0, 2 * h) + q(0, 2 * h + 1) * key(0, 2 * h + 1));
      z += s[k];
    }
    for (int k = 0; k < 3; ++k) {
      expected_alpha[h][k] = s[k] / z;
      const Matrix<double> val = src[k] * att.w_v.value.transpose();
      expected_out(0, 2 * h) += expected_alpha[h][k] * val(0, 2 * h);
      expected_out(0, 2 * h + 1) += expected_alpha[h][k] * val(0, 2 * h + 1);
    }
  }

  Tape<double> tape;
  std::vector<Var<double>> keys;
  for (const auto& s : src) keys.push_back(tape.constant(s));
  auto res = att.forward(tape, tape.constant(query), keys, keys);
  for (int h = 0; h < 2; ++h)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(res.weights(0, h * 3 + k), expected_alpha[h][k], 1e-12);
  EXPECT_TRUE(res.output.value().isApprox(expected_out, 1e-12));
}

TEST(Attention, EmptyKeysRejected) {
  auto att = make_attention(2, 2, 4, 2, 0);
  Tape<double> tape;
  EXPECT_THROW(att.forward(tape, tape.constant(mat({{1, 2}})), {}, {}), ArgumentError);
}

TEST(Attention, WeightsNormalizedForAllKeyCounts) {
  auto att = make_attention(8, 8, 16, 4, 3);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = 1 + trial % 10;
    Tape<double> tape;
    std::vector<Var<double>> keys;
    for (int k = 0; k < K; ++k) keys.push_back(tape.constant(random_matrix(2, 8, rng, -3, 3)));
    auto res = att.forward(tape, tape.constant(random_matrix(2, 8, rng, -3, 3)), keys, keys);
    for (Eigen::Index r = 0; r < 2; ++r)
      for (int h = 0; h < 4; ++h) {
        double s = 0;
        for (int k = 0; k < K; ++k) {
          EXPECT_GE(res.weights(r, h * K + k), 0.0);
          s += res.weights(r, h * K + k);
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
  }
}

TEST(Backward, LinearGradientIsInput) {
  Tensor<double> w({1, 3});
  w.value = mat({{0.3, -1.2, 2.0}});
  const Matrix<double> x = mat({{4, 5, 6}});
  Tape<double> tape;
  auto loss = sum(mul(tape.parameter(w), tape.constant(x)));
  tape.backward(loss);
  EXPECT_EQ(w.grad, x);
}

TEST(Backward, Quadratic) {
  Tensor<double> w({1});
  w.value(0, 0) = 5;
  Tape<double> tape;
  Matrix<double> three(1, 1);
  three(0, 0) = 3;
  auto d = sub(tape.parameter(w), tape.constant(three));
  tape.backward(sum(square(d)));
  EXPECT_DOUBLE_EQ(w.grad(0, 0), 4.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tensor<double> w({2});
  Tape<double> tape;
  auto v = tape.parameter(w);
  EXPECT_THROW(tape.backward(v), ArgumentError);
}

TEST(Backward, CompositeDenseGruDenseMatchesFiniteDifferences) {
  Rng rng(0);
  DenseLayer<double> in(3, 4), out(5, 1);
  GruCell<double> gru(4, 5);
  in.init(rng);
  gru.init(rng);
  out.init(rng);
  const Matrix<double> x = random_matrix(2, 3, rng);
  const Matrix<double> h0 = random_matrix(2, 5, rng, -0.5, 0.5);

  ParameterList<double> params;
  params.add_all("in.", in);
  params.add_all("gru.", gru);
  params.add_all("out.", out);
  auto report = grad_check(params, [&](Tape<double>& tape) {
    auto e = tanh(in.forward(tape, tape.constant(x)));
    auto h = gru.step(tape, e, tape.constant(h0));
    h = gru.step(tape, e, h);
    return sum(square(out.forward(tape, h)));
  });
  EXPECT_TRUE(report.passed) << report.worst_parameter << " rel " << report.max_rel_error;
}

TEST(GradCheck, LinearLayerIsExact) {
  Rng rng(1);
  DenseLayer<double> layer(4, 3);
  layer.init(rng);
  const Matrix<double> x = random_matrix(5, 4, rng);
  const Matrix<double> w = random_matrix(5, 3, rng);
  ParameterList<double> params;
  params.add_all("", layer);
  auto report = grad_check(params, [&](Tape<double>& tape) {
    return sum(mul(layer.forward(tape, tape.constant(x)), tape.constant(w)));
  });
  EXPECT_LT(report.max_rel_error, 1e-6);
}

TEST(GradCheck, GruCell) {
  Rng rng(2);
  GruCell<double> gru(3, 6);
  gru.init(rng);
  const Matrix<double> x = random_matrix(4, 3, rng);
  const Matrix<double> h = random_matrix(4, 6, rng, -0.9, 0.9);
  const Matrix<double> w = random_matrix(4, 6, rng);
  Matrix<double> mask(4, 1);
  mask << 1, 0, 1, 1;
  ParameterList<double> params;
  params.add_all("", gru);
  auto report = grad_check(params, [&](Tape<double>& tape) {
    auto h1 = gru.step(tape, tape.constant(x), tape.constant(h), &mask);
    return sum(mul(h1, tape.constant(w)));
  });
  EXPECT_TRUE(report.passed) << report.worst_parameter << " rel " << report.max_rel_error;
}

TEST(GradCheck, AttentionModule) {
  auto att = make_attention(5, 4, 8, 4, 9);
  Rng rng(3);
  const Matrix<double> q = random_matrix(3, 5, rng);
  std::vector<Matrix<double>> src;
  for (int k = 0; k < 4; ++k) src.push_back(random_matrix(3, 4, rng));
  const Matrix<double> w = random_matrix(3, 8, rng);
  ParameterList<double> params;
  params.add_all("", att);
  auto report = grad_check(params, [&](Tape<double>& tape) {
    std::vector<Var<double>> keys;
    for (const auto& s : src) keys.push_back(tape.constant(s));
    auto res = att.forward(tape, tape.constant(q), keys, keys);
    return sum(mul(res.output, tape.constant(w)));
  });
  EXPECT_TRUE(report.passed) << report.worst_parameter << " rel " << report.max_rel_error;
}

TEST(GradCheck, InputGradientsOfEveryOpMatchAtRandomPoints) {
  // 100 random parameter points across dense, GRU and attention layers.
  Rng rng(42);
  for (int point = 0; point < 100; ++point) {
    DenseLayer<double> dense(3, 4);
    GruCell<double> gru(4, 3);
    MultiHeadAttention<double> att(3, 3, 4, 2);
    dense.init(rng);
    gru.init(rng);
    att.init(rng);
    const Matrix<double> x = random_matrix(2, 3, rng);
    const Matrix<double> w = random_matrix(2, 4, rng);
    ParameterList<double> params;
    params.add_all("dense.", dense);
    params.add_all("gru.", gru);
    params.add_all("att.", att);
    auto report = grad_check(params, [&](Tape<double>& tape) {
      auto e = elu(dense.forward(tape, tape.constant(x)));
      auto h = gru.step(tape, e, tape.constant(Matrix<double>::Zero(2, 3)));
      auto h2 = gru.step(tape, e, h);
      auto res = att.forward(tape, h2, {h, h2}, {h, h2});
      auto lp = log_softmax(res.output);
      return add(sum(mul(lp, tape.constant(w))), sum(row_norm(res.output)));
    });
    ASSERT_TRUE(report.passed) << "point " << point << ": " << report.worst_parameter << " rel "
                               << report.max_rel_error;
  }
}

TEST(GradCheck, StructuralOps) {
  Rng rng(8);
  Tensor<double> a({4, 6}), b({4, 2});
  a.value = random_matrix(4, 6, rng);
  b.value = random_matrix(4, 2, rng, 0.1, 1.0);
  ParameterList<double> params;
  params.add("a", a);
  params.add("b", b);
  auto report = grad_check(params, [&](Tape<double>& tape) {
    auto va = tape.parameter(a);
    auto vb = tape.parameter(b);
    auto mixed = row_bmm(vb, abs(va));                         // [4 x 3]
    auto r = reshape(slice_cols(va, 2, 4), 8, 2);              // [8 x 2]
    auto rows = take_rows(r, {0, 3, 3, 7});                    // [4 x 2]
    auto c = concat_cols<double>({mixed, rows, sigmoid(vb)});  // [4 x 7]
    auto picked = pick(softmax(c), {0, 6, 2, 3});
    auto stacked = concat_rows<double>({picked, row_sum(mul(va, va))});
    return add(sum(scale(stacked, 0.7)), mean(grad_scale(relu(va), 1.0)));
  });
  EXPECT_TRUE(report.passed) << report.worst_parameter << " rel " << report.max_rel_error;
}

TEST(RmsProp, ZeroGradientIsIdentity) {
  Rng rng(0);
  DenseLayer<float> layer(3, 2);
  layer.init(rng);
  const auto before = layer.weight.value;
  ParameterList<float> params;
  params.add_all("", layer);
  RmsPropState<float> opt;
  opt.step(params);
  EXPECT_EQ(layer.weight.value, before);
}

TEST(RmsProp, FirstStepMatchesHandComputation) {
  Tensor<double> p({1});
  p.grad(0, 0) = 1.0;
  ParameterList<double> params;
  params.add("p", p);
  RmsPropState<double> opt;
  opt.step(params);
  EXPECT_NEAR(p.value(0, 0), -5e-4 / (std::sqrt(0.01) + 1e-5), 1e-12);
  EXPECT_NEAR(p.value(0, 0), -5.0e-3, 1e-6);
  EXPECT_EQ(p.grad(0, 0), 0.0);
}

TEST(RmsProp, SquareAverageFollowsGeometricRecursion) {
  Tensor<double> p({1});
  ParameterList<double> params;
  params.add("p", p);
  RmsPropState<double> opt;
  const double g = 0.7, a = 0.99;
  double expected_p = 0.0;
  for (int k = 1; k <= 2; ++k) {
    p.grad(0, 0) = g;
    opt.step(params);
    const double v = (1.0 - std::pow(a, k)) * g * g;  // closed form of v_k
    EXPECT_NEAR(opt.square_avg[0](0, 0), v, 1e-15);
    expected_p -= 5e-4 * g / (std::sqrt(v) + 1e-5);
    EXPECT_NEAR(p.value(0, 0), expected_p, 1e-15);
  }
}

TEST(ClipGradNorm, ScalesToMaxNorm) {
  Tensor<double> p({2});
  p.grad << 30.0, 40.0;
  ParameterList<double> params;
  params.add("p", p);
  EXPECT_DOUBLE_EQ(clip_grad_norm(params, 10.0), 50.0);
  EXPECT_NEAR(p.grad.norm(), 10.0, 1e-5);
}

TEST(Determinism, ForwardIsBitIdentical) {
  Rng rng(0);
  GruCell<float> gru(8, 16);
  MultiHeadAttention<float> att(16, 16, 16, 4);
  gru.init(rng);
  att.init(rng);
  Matrix<float> x = Matrix<float>::Random(5, 8);
  auto run = [&] {
    Tape<float> tape;
    auto h = gru.step(tape, tape.constant(x), tape.constant(Matrix<float>::Zero(5, 16)));
    auto h2 = gru.step(tape, tape.constant(x), h);
    return Matrix<float>(att.forward(tape, h2, {h, h2}, {h, h2}).output.value());
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())));
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor<float>(Shape{}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2, 2}), DimensionError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(5);
  std::uniform_int_distribution<int> dim(1, 7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<NamedTensor> tensors;
    for (int i = 0; i < 1 + trial % 4; ++i) {
      NamedTensor t;
      t.name = "layer" + std::to_string(i) + ".w";
      t.shape = (i % 2) ? Shape{static_cast<std::size_t>(dim(rng))}
                        : Shape{static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(dim(rng))};
      for (std::size_t k = 0; k < shape_size(t.shape); ++k) {
        std::uint32_t bits = static_cast<std::uint32_t>(rng());
        float f;
        std::memcpy(&f, &bits, 4);
        if (!std::isfinite(f)) f = 1.5f;
        t.values.push_back(f);
      }
      tensors.push_back(t);
    }
    const auto bytes = encode_checkpoint(tensors);
    const auto back = decode_checkpoint(bytes);
    ASSERT_EQ(back.size(), tensors.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      EXPECT_EQ(back[i].name, tensors[i].name);
      EXPECT_EQ(back[i].shape, tensors[i].shape);
      EXPECT_EQ(0, std::memcmp(back[i].values.data(), tensors[i].values.data(), 4 * back[i].values.size()));
    }
    EXPECT_EQ(encode_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, HeaderLayout) {
  NamedTensor t{"w", {2}, {1.0f, -2.0f}};
  const auto bytes = encode_checkpoint({t});
  ASSERT_EQ(bytes.size(), 9u + 4 + 4 + 1 + 4 + 8 + 8);
  EXPECT_EQ(bytes.substr(0, 9), "SMAUGCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 1u);
  EXPECT_EQ(bytes[17], 'w');
}

TEST(Checkpoint, RejectsCorruptInput) {
  EXPECT_THROW(decode_checkpoint("NOTACKPT"), CheckpointError);
  const auto bytes = encode_checkpoint({NamedTensor{"w", {3}, {1, 2, 3}}});
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), CheckpointError);
}

TEST(Checkpoint, RestoreChecksShapes) {
  DenseLayer<float> a(3, 2), b(2, 2);
  Rng rng(1);
  a.init(rng);
  std::vector<NamedTensor> snap;
  collect_tensors(a, "dense.", snap);
  DenseLayer<float> same(3, 2);
  restore_tensors(same, "dense.", snap);
  EXPECT_EQ(same.weight.value, a.weight.value);
  EXPECT_THROW(restore_tensors(b, "dense.", snap), CheckpointError);
}
