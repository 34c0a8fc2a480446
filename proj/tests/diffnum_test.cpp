#include <gtest/gtest.h>

#include <cmath>

#include "support/finite_diff.hpp"
#include "takead/diffnum/checkpoint.hpp"
#include "takead/diffnum/ops.hpp"
#include "takead/diffnum/optimizer.hpp"
#include "takead/diffnum/random.hpp"

using namespace takead;
using namespace takead::diffnum;

TEST(Primitive, SoftmaxOfZerosIsUniform) {
  Tape t;
  Var y = softmax(t, t.constant(Tensor::vector({0.0, 0.0})));
  EXPECT_EQ(t.value(y)[0], 0.5);
  EXPECT_EQ(t.value(y)[1], 0.5);
}

TEST(Primitive, Relu) {
  Tape t;
  Var y = relu(t, t.constant(Tensor::vector({-1.0, 2.0})));
  EXPECT_EQ(t.value(y), Tensor::vector({0.0, 2.0}));
}

TEST(Primitive, AttentionSingleKeyReturnsValue) {
  Tape t;
  Var q = t.constant(Tensor::matrix(1, 3, {0.3, -1.2, 2.0}));
  Var v = t.constant(Tensor::matrix(1, 2, {7.0, -4.5}));
  Var o = scaled_dot_attention(t, q, q, v);
  EXPECT_EQ(t.value(o), Tensor::matrix(1, 2, {7.0, -4.5}));
}

TEST(Primitive, AttentionAllMaskedYieldsZero) {
  Tape t;
  Var q = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var k = t.constant(Tensor::matrix(3, 2, {1, 0, 0, 1, 1, 1}));
  Var o = scaled_dot_attention(t, q, k, k, {false, false, false});
  for (double x : t.value(o).values()) EXPECT_EQ(x, 0.0);
}

TEST(Primitive, SoftmaxRowsSumToOne) {
  Rng rng(3);
  Tape t;
  Tensor x(5, 7);
  for (auto& v : x.values()) v = 20.0 * rng.normal();
  Var y = softmax(t, t.constant(x));
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += t.value(y).at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Primitive, SigmoidInOpenUnitInterval) {
  Tape t;
  Var y = sigmoid(t, t.constant(Tensor::vector({-30.0, 0.0, 30.0})));
  for (double v : t.value(y).values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Primitive, ShapeMismatchNamesOpAndShapes) {
  Tape t;
  Var x = t.constant(Tensor(2, 3));
  Var w = t.constant(Tensor(4, 5));
  Var b = t.constant(Tensor(Shape{5}));
  try {
    linear(t, x, w, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("linear"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[4,5]"), std::string::npos);
  }
}

TEST(Primitive, GenericDispatchChecksArity) {
  Tape t;
  Var x = t.constant(Tensor::vector({1.0}));
  std::vector<Var> in{x, x};
  EXPECT_THROW(forward_primitive(t, OpKind::Relu, in), ShapeError);
  std::vector<Var> one{x};
  Var y = forward_primitive(t, OpKind::Sigmoid, one);
  EXPECT_NEAR(t.value(y)[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Backward, MeanGivesUniformGradient) {
  ParameterSet ps;
  ps.add("p", "g", Tensor::vector({1, 2, 3, 4}));
  Tape t;
  auto g = t.backward(mean(t, t.param(ps, 0)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g[0][i], 0.25);
}

TEST(Backward, SigmoidAtZero) {
  ParameterSet ps;
  ps.add("w", "g", Tensor::vector({0.0}));
  Tape t;
  auto g = t.backward(sigmoid(t, t.param(ps, 0)));
  EXPECT_DOUBLE_EQ(g[0][0], 0.25);
}

TEST(Backward, RejectsNonScalarAndZeroesUnreachable) {
  ParameterSet ps;
  ps.add("used", "g", Tensor::vector({1.0, 2.0}));
  ps.add("unused", "g", Tensor::vector({5.0}));
  Tape t;
  Var u = t.param(ps, 0);
  t.param(ps, 1);
  EXPECT_THROW(t.backward(u), ShapeError);
  auto g = t.backward(sum(t, u));
  EXPECT_EQ(g[1][0], 0.0);
  EXPECT_EQ(g[0][0], 1.0);
}

namespace {

// Small composite network exercising every primitive that carries gradient.
struct TinyNet {
  ParameterSet ps;
  explicit TinyNet(std::uint64_t seed) {
    Rng rng(seed);
    auto rnd = [&](std::size_t r, std::size_t c) {
      Tensor t(r, c);
      for (auto& v : t.values()) v = 0.5 * rng.normal();
      return t;
    };
    ps.add("w1", "a", rnd(4, 6));
    ps.add("b1", "a", Tensor::vector({0.1, -0.2, 0.3, 0.0, 0.05, -0.1}));
    ps.add("q", "a", rnd(3, 6));
    ps.add("wk", "a", rnd(6, 6));
    ps.add("w2", "b", rnd(12, 1));
    ps.add("b2", "b", Tensor::vector({0.2}));
  }

  Var loss(Tape& t, const Tensor& x) const {
    Var h = relu(t, linear(t, t.constant(x), t.param(ps, "w1"), t.param(ps, "b1")));
    Var k = linear(t, h, t.param(ps, "wk"), t.constant(Tensor(Shape{6})));
    Var q = t.param(ps, "q");
    Var a = add(t, q, scaled_dot_attention(t, q, k, h, {true, true, false, true, true}));
    Var logits = linear(t, concat(t, a, q), t.param(ps, "w2"), t.param(ps, "b2"));
    Var lp = log_softmax(t, slice(t, logits, 0, 3));
    Var s = log(t, add_scalar(t, sigmoid(t, logits), 1e-3));
    Var l = add(t, scale(t, gather(t, lp, 1), -1.0), mean(t, s));
    return add(t, l, log_sigmoid(t, gather(t, logits, 2)));
  }
};

}  // namespace

TEST(Backward, CompositeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TinyNet net(seed);
    Rng rng(100 + seed);
    Tensor x(5, 4);
    for (auto& v : x.values()) v = rng.normal();
    Tape t;
    auto g = t.backward(net.loss(t, x));
    auto res = oracle::check_gradients(net.ps, g, [&] {
      Tape tt;
      return tt.value(net.loss(tt, x))[0];
    });
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(Backward, ReplayIsBitIdentical) {
  TinyNet net(7);
  Tensor x(5, 4, 0.3);
  Tape t;
  Var l = net.loss(t, x);
  auto g1 = t.backward(l);
  auto g2 = t.backward(l);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g2[i]);
}

TEST(Optimizer, ZeroGradientLeavesParameters) {
  ParameterSet ps;
  ps.add("p", "g", Tensor::vector({1.5, -2.0}));
  Optimizer opt(ps, {});
  EXPECT_EQ(opt.step(ps, zero_gradients(ps)), StepStatus::Applied);
  EXPECT_EQ(ps[0].value, Tensor::vector({1.5, -2.0}));
  EXPECT_EQ(opt.state().step, 1u);
}

TEST(Optimizer, PlainGradientDescentStep) {
  ParameterSet ps;
  ps.add("p", "g", Tensor::vector({0.0}));
  OptimizerConfig cfg;
  cfg.method = Method::Sgd;
  cfg.learning_rate = 0.1;
  Optimizer opt(ps, cfg);
  opt.step(ps, {Tensor::vector({1.0})});
  EXPECT_DOUBLE_EQ(ps[0].value[0], -0.1);
}

TEST(Optimizer, AdamConvergesOnQuadratic) {
  // f(p) = 2 (p - 3)^2, minimum at p = 3.
  ParameterSet ps;
  ps.add("p", "g", Tensor::vector({-1.0}));
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  Optimizer opt(ps, cfg);
  std::size_t steps = 0;
  while (steps < 1000 && std::abs(ps[0].value[0] - 3.0) > 1e-6) {
    opt.step(ps, {Tensor::vector({4.0 * (ps[0].value[0] - 3.0)})});
    ++steps;
  }
  EXPECT_LE(std::abs(ps[0].value[0] - 3.0), 1e-6);
  EXPECT_LE(steps, 1000u);
}

TEST(Optimizer, CosineEndsAtOnePercent) {
  ParameterSet ps;
  ps.add("p", "g", Tensor::vector({0.0}));
  OptimizerConfig cfg;
  cfg.schedule = ScheduleKind::Cosine;
  cfg.total_steps = 50;
  Optimizer opt(ps, cfg);
  EXPECT_DOUBLE_EQ(opt.learning_rate_at(0), cfg.learning_rate);
  EXPECT_LE(opt.learning_rate_at(49), 0.01 * cfg.learning_rate + 1e-18);
  for (std::size_t s = 1; s < 50; ++s) EXPECT_LE(opt.learning_rate_at(s), opt.learning_rate_at(s - 1));
}

TEST(Optimizer, NonFiniteGradientAborts) {
  ParameterSet ps;
  ps.add("p", "g", Tensor::vector({1.0}));
  Optimizer opt(ps, {});
  EXPECT_EQ(opt.step(ps, {Tensor::vector({std::nan("")})}), StepStatus::AbortedNonFinite);
  EXPECT_EQ(ps[0].value[0], 1.0);
  EXPECT_EQ(opt.state().step, 0u);
}

TEST(Optimizer, FrozenGroupsUntouched) {
  ParameterSet ps;
  ps.add("a", "enc", Tensor::vector({1.0}));
  ps.add("b", "ctrl", Tensor::vector({1.0}));
  OptimizerConfig cfg;
  cfg.method = Method::Sgd;
  cfg.learning_rate = 0.5;
  Optimizer opt(ps, cfg);
  opt.step(ps, {Tensor::vector({1.0}), Tensor::vector({1.0})}, {"ctrl"});
  EXPECT_EQ(ps[0].value[0], 1.0);
  EXPECT_EQ(ps[1].value[0], 0.5);
}

TEST(Checkpoint, RoundTripIsExact) {
  TinyNet net(4);
  const std::string bytes = serialize_parameters(net.ps, {{"vocab_hash", "abc123"}});
  EXPECT_EQ(bytes.rfind(kCheckpointMagic, 0), 0u);
  TinyNet other(99);
  auto meta = deserialize_parameters(bytes, other.ps);
  EXPECT_EQ(meta.at("vocab_hash"), "abc123");
  for (std::size_t i = 0; i < net.ps.size(); ++i) EXPECT_EQ(net.ps[i].value, other.ps[i].value);
  EXPECT_EQ(parameter_hash(net.ps), parameter_hash(other.ps));
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  TinyNet net(4);
  std::string bytes = serialize_parameters(net.ps);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_parameters(bad, net.ps), CheckpointError);
  EXPECT_THROW(deserialize_parameters(bytes.substr(0, bytes.size() - 3), net.ps), CheckpointError);
}
