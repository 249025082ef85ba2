#include <advstl/autodiff.hpp>

#include "oracles/finite_diff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace advstl;
using ad::Tape;
using ad::Var;

TEST(Lift, ConstantHasZeroGradient) {
  Tape tape;
  Var w = tape.lift(3.0);
  Var c = tape.lift(0.0);
  Var root = c * 1.0;
  tape.backward(root);
  EXPECT_EQ(c.value(), 0.0);
  EXPECT_EQ(w.adjoint(), 0.0);
}

TEST(Lift, StoresValue) {
  Tape tape;
  EXPECT_EQ(tape.lift(9.81).value(), 9.81);
}

TEST(Lift, RejectsNonFinite) {
  Tape tape;
  EXPECT_THROW(tape.lift(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  EXPECT_THROW(tape.lift(std::numeric_limits<double>::infinity()), std::domain_error);
}

TEST(Apply, ProductRule) {
  Tape tape;
  Var x = tape.lift(2.0), y = tape.lift(3.0);
  Var z = x * y + x;
  tape.backward(z);
  EXPECT_EQ(z.value(), 8.0);
  EXPECT_EQ(x.adjoint(), 4.0);
  EXPECT_EQ(y.adjoint(), 2.0);
}

TEST(Apply, MinTieGoesLeft) {
  Tape tape;
  Var x = tape.lift(1.0), y = tape.lift(1.0);
  Var m = ad::min(x, y);
  tape.backward(m);
  EXPECT_EQ(m.value(), 1.0);
  EXPECT_EQ(x.adjoint(), 1.0);
  EXPECT_EQ(y.adjoint(), 0.0);
}

TEST(Apply, MaxTieGoesLeft) {
  Tape tape;
  Var x = tape.lift(-2.0), y = tape.lift(-2.0);
  tape.backward(ad::max(x, y));
  EXPECT_EQ(x.adjoint(), 1.0);
  EXPECT_EQ(y.adjoint(), 0.0);
}

TEST(Apply, AbsAtZeroUsesPositiveBranch) {
  Tape tape;
  Var x = tape.lift(0.0);
  tape.backward(ad::abs(x));
  EXPECT_EQ(x.adjoint(), 1.0);
}

TEST(Apply, LeakyRelu) {
  Tape tape;
  Var x = tape.lift(-2.0);
  Var y = ad::leaky_relu(x, 0.01);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(y.value(), -0.02);
  EXPECT_DOUBLE_EQ(x.adjoint(), 0.01);
}

TEST(Apply, DivisionByZeroRejected) {
  Tape tape;
  Var x = tape.lift(1.0), z = tape.lift(0.0);
  EXPECT_THROW(x / z, std::domain_error);
}

TEST(Apply, MixedTapesRejected) {
  Tape a, b;
  Var x = a.lift(1.0), y = b.lift(2.0);
  EXPECT_THROW(x + y, std::invalid_argument);
}

TEST(Apply, DetachedOperandRejected) {
  Tape a;
  Var x = a.lift(1.0);
  EXPECT_THROW(a.apply(ad::Op::add, x, Var{}), std::invalid_argument);
}

TEST(Backward, TanhAtZero) {
  Tape tape;
  Var w = tape.lift(0.0);
  tape.backward(ad::tanh(w));
  EXPECT_EQ(w.adjoint(), 1.0);
}

TEST(Backward, NonAncestorsGetZero) {
  Tape tape;
  Var x = tape.lift(1.5), y = tape.lift(2.5);
  Var unrelated = y * y;
  Var root = x * x;
  tape.backward(root);
  EXPECT_EQ(y.adjoint(), 0.0);
  EXPECT_EQ(unrelated.adjoint(), 0.0);
  EXPECT_EQ(root.adjoint(), 1.0);
  EXPECT_EQ(x.adjoint(), 3.0);
}

TEST(Backward, RepeatedSweepsDoNotAccumulate) {
  Tape tape;
  Var x = tape.lift(2.0);
  Var y = x * x * x;
  tape.backward(y);
  tape.backward(y);
  EXPECT_EQ(x.adjoint(), 12.0);
}

TEST(Backward, ClampSaturatedSideHasZeroGradient) {
  Tape tape;
  Var x = tape.lift(5.0);
  tape.backward(ad::clamp(x, -1.0, 1.0));
  EXPECT_EQ(x.adjoint(), 0.0);
  Var y = tape.lift(0.3);
  tape.backward(ad::clamp(y, -1.0, 1.0));
  EXPECT_EQ(y.adjoint(), 1.0);
}

// Every elementary op against central differences on smooth points.
TEST(Backward, ElementaryOpsMatchFiniteDifferences) {
  auto f = [](auto x, auto y) {
    return ad::sin(x) * ad::cos(y) + ad::exp(x * 0.3) / (y * y + 1.0) + ad::pow_const(y * y + 2.0, 1.5) -
           ad::tanh(x - y) + ad::leaky_relu(x - 0.2) + ad::abs(y - 0.1);
  };
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const double x0 = u(rng), y0 = u(rng);
    if (std::abs(x0 - 0.2) < 1e-3 || std::abs(y0 - 0.1) < 1e-3) continue;
    Tape tape;
    Var x = tape.lift(x0), y = tape.lift(y0);
    tape.backward(f(x, y));
    const auto fd = oracle::central_difference([&](const std::vector<double>& v) { return f(v[0], v[1]); }, {x0, y0});
    EXPECT_NEAR(x.adjoint(), fd[0], 1e-6 * std::max(1.0, std::abs(fd[0])));
    EXPECT_NEAR(y.adjoint(), fd[1], 1e-6 * std::max(1.0, std::abs(fd[1])));
  }
}

TEST(Tape, ReplayReproducesEveryNode) {
  Tape tape;
  Var x = tape.lift(0.7), y = tape.lift(-1.3);
  Var z = ad::max(ad::min(x * y, x - y), ad::tanh(x / y)) + ad::leaky_relu(y, 0.2) + ad::pow_const(x, 3.0);
  (void)z;
  for (std::size_t i = 0; i < tape.size(); ++i) EXPECT_EQ(tape.replay(i), tape.node(i).value) << "node " << i;
}

TEST(Tape, DoubleAndVarForwardAgree) {
  auto f = [](auto x, auto y) { return ad::max(ad::min(x * y, x - y), ad::tanh(x / y)) + ad::leaky_relu(y); };
  Tape tape;
  const Var v = f(tape.lift(0.7), tape.lift(-1.3));
  EXPECT_EQ(v.value(), f(0.7, -1.3));
}

TEST(Tape, GradientReadsLeafAdjoints) {
  Tape tape;
  const std::vector<double> xs{1.0, 2.0, 3.0};
  const auto vs = tape.lift(xs);
  Var s = vs[0] * vs[1] + vs[2];
  tape.backward(s);
  EXPECT_EQ(tape.gradient(vs), (std::vector<double>{2.0, 1.0, 1.0}));
}
