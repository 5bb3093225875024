#include "depslab/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "support.hpp"

namespace depslab::ad {
namespace {

using Unary = std::function<Var(Var)>;
using Binary = std::function<Var(Var, Var)>;

Matrix random_matrix(std::size_t r, std::size_t c, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& v : m.data) v = u(rng);
  return m;
}

// Weighted sum keeps every output entry distinguishable in the gradient.
double weighted(const Binary& f, const Matrix& a, const Matrix& b, const Matrix& w,
                std::vector<double>* ga = nullptr, std::vector<double>* gb = nullptr) {
  Tape tape;
  Var x = tape.leaf(a, true);
  Var y = tape.leaf(b, true);
  Var out = f(x, y);
  Var loss = sum(out * tape.constant(w));
  tape.backward(loss);
  if (ga) ga->assign(tape.grad(x).begin(), tape.grad(x).end());
  if (gb) gb->assign(tape.grad(y).begin(), tape.grad(y).end());
  return loss.item();
}

void expect_binary_matches_fd(const Binary& f, const Matrix& a, const Matrix& b,
                              std::size_t out_rows, std::size_t out_cols) {
  const Matrix w = random_matrix(out_rows, out_cols, 0.5, 1.5, 99);
  std::vector<double> ga, gb;
  weighted(f, a, b, w, &ga, &gb);
  const auto fa = testing::central_difference(
      [&](std::vector<double> v) { return weighted(f, Matrix(a.rows, a.cols, v), b, w); },
      a.data, 1e-6);
  const auto fb = testing::central_difference(
      [&](std::vector<double> v) { return weighted(f, a, Matrix(b.rows, b.cols, v), w); },
      b.data, 1e-6);
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(ga[i], fa[i], 1e-6 * (1 + std::fabs(fa[i])));
  for (std::size_t i = 0; i < gb.size(); ++i) EXPECT_NEAR(gb[i], fb[i], 1e-6 * (1 + std::fabs(fb[i])));
}

void expect_unary_matches_fd(const Unary& f, double lo, double hi, std::size_t out_rows = 2,
                             std::size_t out_cols = 3) {
  const Matrix a = random_matrix(2, 3, lo, hi, 7);
  const Matrix dummy(1, 1, 0.0);
  expect_binary_matches_fd([&](Var x, Var) { return f(x); }, a, dummy, out_rows, out_cols);
}

TEST(Autodiff, UnaryOpsMatchFiniteDifferences) {
  expect_unary_matches_fd([](Var x) { return -x; }, -2, 2);
  expect_unary_matches_fd([](Var x) { return exp(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return log(x); }, 0.5, 3);
  expect_unary_matches_fd([](Var x) { return sqrt(x); }, 0.5, 3);
  expect_unary_matches_fd([](Var x) { return square(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return abs(x); }, 0.2, 2);
  expect_unary_matches_fd([](Var x) { return abs(x); }, -2, -0.2);
  expect_unary_matches_fd([](Var x) { return tanh(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return sin(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return cos(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return sinh(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return cosh(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return pow(x, 2.5); }, 0.5, 2);
  expect_unary_matches_fd([](Var x) { return 3.0 + x * 2.0 - 1.0; }, -2, 2);
  expect_unary_matches_fd([](Var x) { return 2.0 / x; }, 0.5, 2);
  expect_unary_matches_fd([](Var x) { return x / 4.0; }, -2, 2);
  expect_unary_matches_fd([](Var x) { return log_softmax(x); }, -2, 2);
  expect_unary_matches_fd([](Var x) { return col_sum(x); }, -2, 2, 1, 3);
  expect_unary_matches_fd([](Var x) { return mean(x); }, -2, 2, 1, 1);
  expect_unary_matches_fd([](Var x) { return view(x, 1, 2, 2); }, -2, 2, 2, 2);
  expect_unary_matches_fd([](Var x) { return concat_rows({x, square(x)}); }, -2, 2, 4, 3);
}

TEST(Autodiff, BinaryOpsBroadcastAndMatchFiniteDifferences) {
  const Matrix a = random_matrix(2, 3, 0.5, 2, 1);
  const Matrix b = random_matrix(2, 3, 0.5, 2, 2);
  const Matrix row = random_matrix(1, 3, 0.5, 2, 3);
  const Matrix scalar = random_matrix(1, 1, 0.5, 2, 4);
  for (const Matrix* rhs : {&b, &row, &scalar}) {
    expect_binary_matches_fd([](Var x, Var y) { return x + y; }, a, *rhs, 2, 3);
    expect_binary_matches_fd([](Var x, Var y) { return x - y; }, a, *rhs, 2, 3);
    expect_binary_matches_fd([](Var x, Var y) { return x * y; }, a, *rhs, 2, 3);
    expect_binary_matches_fd([](Var x, Var y) { return x / y; }, a, *rhs, 2, 3);
  }
  const Matrix m = random_matrix(3, 4, -1, 1, 5);
  expect_binary_matches_fd([](Var x, Var y) { return matmul(x, y); }, a, m, 2, 4);
  const Matrix sd = random_matrix(2, 3, 0.5, 1.5, 6);
  expect_binary_matches_fd([&](Var x, Var y) { return normal_log_density(x, y, x.tape()->constant(sd)); },
                           a, b, 2, 3);
  expect_binary_matches_fd([&](Var x, Var y) { return normal_log_density(x.tape()->constant(a), x, y); },
                           b, sd, 2, 3);
}

TEST(Autodiff, MinMaxSendTiesToFirstArgument) {
  Tape tape;
  Var a = tape.leaf(Matrix(1, 2, {1.0, 2.0}), true);
  Var b = tape.leaf(Matrix(1, 2, {1.0, 3.0}), true);
  tape.backward(sum(min(a, b)));
  EXPECT_EQ(tape.grad(a)[0], 1.0);
  EXPECT_EQ(tape.grad(b)[0], 0.0);
  EXPECT_EQ(tape.grad(a)[1], 1.0);
  tape.backward(sum(max(a, b)));
  EXPECT_EQ(tape.grad(a)[0], 1.0);
  EXPECT_EQ(tape.grad(b)[0], 0.0);
  EXPECT_EQ(tape.grad(b)[1], 1.0);
}

TEST(Autodiff, ClampPassesGradientInsideAndAtEnds) {
  Tape tape;
  Var x = tape.leaf(Matrix(1, 4, {-2.0, -1.0, 0.5, 3.0}), true);
  tape.backward(sum(clamp(x, -1.0, 1.0)));
  const auto g = tape.grad(x);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 1.0);
  EXPECT_EQ(g[2], 1.0);
  EXPECT_EQ(g[3], 0.0);
}

TEST(Autodiff, AbsUsesPlusOneAtZero) {
  Tape tape;
  Var x = tape.leaf(Matrix(1, 1, 0.0), true);
  tape.backward(sum(abs(x)));
  EXPECT_EQ(tape.grad(x)[0], 1.0);
}

TEST(Autodiff, WhereSelectsValuesAndGradients) {
  Tape tape;
  Var a = tape.leaf(Matrix(1, 3, {1, 2, 3}), true);
  Var b = tape.leaf(Matrix(1, 3, {10, 20, 30}), true);
  Var w = where(Matrix(1, 3, {1, 0, 1}), a, b);
  EXPECT_EQ(w.value()[1], 20.0);
  tape.backward(sum(w));
  EXPECT_EQ(tape.grad(a)[1], 0.0);
  EXPECT_EQ(tape.grad(b)[1], 1.0);
  EXPECT_EQ(tape.grad(a)[2], 1.0);
}

TEST(Autodiff, CategoricalLogProbMatchesLogSoftmax) {
  Tape tape;
  Var logits = tape.leaf(random_matrix(3, 4, -1, 1, 11), true);
  const std::vector<std::size_t> idx = {0, 2, 1, 2};
  Var lp = categorical_log_prob(logits, idx);
  Var ls = log_softmax(logits);
  for (std::size_t m = 0; m < 4; ++m) {
    EXPECT_NEAR(lp.value()[m], ls.value()[idx[m] * 4 + m], 1e-14);
  }
  expect_binary_matches_fd([&](Var x, Var) { return categorical_log_prob(x, idx); },
                           random_matrix(3, 4, -1, 1, 12), Matrix(1, 1), 1, 4);
}

TEST(Autodiff, GradientCapRescalesAdjointOnly) {
  Tape tape;
  Var x = tape.leaf(Matrix(1, 2, {1.0, 1.0}), true);
  Var y = cap_gradient_norm(x * 100.0, 1.0);
  EXPECT_EQ(y.value()[0], 100.0);
  tape.backward(sum(y));
  // Adjoint (1, 1) has norm sqrt(2), rescaled to norm 1 before the x100.
  EXPECT_NEAR(tape.grad(x)[0], 100.0 / std::sqrt(2.0), 1e-12);
  Tape cols;
  Var z = cols.leaf(Matrix(2, 2, {1, 1, 1, 1}), true);
  cols.backward(sum(cap_gradient_norm_cols(z * 3.0, 1.0)));
  EXPECT_NEAR(cols.grad(z)[0], 3.0 / std::sqrt(2.0), 1e-12);
}

TEST(Autodiff, LeavesRejectNonFiniteValues) {
  Tape tape;
  EXPECT_THROW(tape.leaf(Matrix(1, 1, std::numeric_limits<double>::quiet_NaN()), false),
               std::invalid_argument);
  EXPECT_THROW(tape.leaf(Matrix(1, 1, std::numeric_limits<double>::infinity()), false),
               std::invalid_argument);
}

TEST(Autodiff, DomainErrorsAreReported) {
  Tape tape;
  EXPECT_THROW(log(tape.constant(0.0)), std::domain_error);
  EXPECT_THROW(sqrt(tape.constant(-1.0)), std::domain_error);
  EXPECT_THROW(normal_log_density(tape.constant(0.0), tape.constant(0.0), tape.constant(0.0)),
               std::domain_error);
}

TEST(Autodiff, RepeatedBackwardIsBitIdentical) {
  Tape tape;
  Var x = tape.leaf(random_matrix(3, 3, -1, 1, 21), true);
  Var loss = sum(tanh(matmul(x, x)) * exp(x));
  tape.backward(loss);
  const std::vector<double> first(tape.grad(x).begin(), tape.grad(x).end());
  tape.backward(loss);
  const std::vector<double> second(tape.grad(x).begin(), tape.grad(x).end());
  EXPECT_EQ(first, second);
}

TEST(Autodiff, BackwardNeedsScalarRoot) {
  Tape tape;
  Var x = tape.leaf(Matrix(2, 1, 1.0), true);
  EXPECT_ANY_THROW(tape.backward(x));
}

}  // namespace
}  // namespace depslab::ad

namespace depslab::ad {
namespace {

TEST(AutodiffExamples, ElementaryValuesAndDerivatives) {
  Tape tape;
  Var z = tape.leaf(Matrix(1, 1, 0.0), true);
  Var t = tanh(z);
  tape.backward(t);
  EXPECT_EQ(t.item(), 0.0);
  EXPECT_EQ(tape.grad(z)[0], 1.0);

  Var three = tape.leaf(Matrix(1, 1, 3.0), true);
  tape.backward(square(three));
  EXPECT_EQ(tape.grad(three)[0], 6.0);

  Var two = tape.leaf(Matrix(1, 1, 2.0), true);
  Var c = clamp(two, 0.0, 1.0);
  tape.backward(c);
  EXPECT_EQ(c.item(), 1.0);
  EXPECT_EQ(tape.grad(two)[0], 0.0);

  Var a = tape.leaf(Matrix(1, 1, 2.0), true);
  Var b = tape.leaf(Matrix(1, 1, 3.0), true);
  tape.backward(a * b);
  EXPECT_EQ(tape.grad(a)[0], 3.0);
  EXPECT_EQ(tape.grad(b)[0], 2.0);
}

TEST(AutodiffExamples, LeafAndSumAdjoints) {
  Tape tape;
  Var x = tape.leaf(Matrix(1, 1, 2.0), true);
  tape.backward(x);
  EXPECT_EQ(tape.grad(x)[0], 1.0);
  Var v = tape.leaf(Matrix(3, 1, 5.0), true);
  Var k = tape.constant(Matrix(3, 1, 2.0));
  Var s = sum(v * k) + sum(v);
  tape.backward(s);
  for (double g : tape.grad(v)) EXPECT_EQ(g, 3.0);
  for (double g : tape.grad(k)) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(sum(tape.constant(Matrix(1, 7, 1.0))).item(), 7.0);
}

TEST(AutodiffExamples, Distributions) {
  Tape tape;
  const double half_log_2pi = 0.5 * std::log(2.0 * std::acos(-1.0));
  EXPECT_NEAR(normal_log_density(tape.constant(0.0), tape.constant(0.0), tape.constant(1.0)).item(),
              -half_log_2pi, 1e-15);
  Var uniform = log_softmax(tape.constant(Matrix(5, 2, 0.7)));
  for (double v : uniform.value()) EXPECT_NEAR(v, -std::log(5.0), 1e-15);
  // d/dmu log N(x; mu, s) = (x - mu) / s^2.
  Var mu = tape.leaf(Matrix(1, 1, 0.3), true);
  tape.backward(normal_log_density(tape.constant(1.1), mu, tape.constant(0.7)));
  EXPECT_NEAR(tape.grad(mu)[0], 0.8 / 0.49, 1e-12);
}

TEST(AutodiffExamples, CompositeAndMatmulMatchFiniteDifferences) {
  auto f = [](double x) { return std::exp(std::tanh(x * x)); };
  Tape tape;
  Var x = tape.leaf(Matrix(1, 1, 0.7), true);
  tape.backward(exp(tanh(square(x))));
  const double fd = (f(0.7 + 1e-5) - f(0.7 - 1e-5)) / 2e-5;
  EXPECT_LT(testing::relative_error(tape.grad(x)[0], fd), 1e-6);

  const Matrix a = random_matrix(4, 4, -1, 1, 31);
  const Matrix b = random_matrix(4, 4, -1, 1, 32);
  const Matrix w = random_matrix(4, 4, 0.5, 1.5, 33);
  auto loss = [&](const Matrix& lhs) {
    Tape t;
    return sum(matmul(t.constant(lhs), t.constant(b)) * t.constant(w)).item();
  };
  Tape t;
  Var la = t.leaf(a, true);
  t.backward(sum(matmul(la, t.constant(b)) * t.constant(w)));
  const auto numeric = testing::central_difference(
      [&](std::vector<double> v) { return loss(Matrix(4, 4, v)); }, a.data, 1e-5);
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    EXPECT_LT(testing::relative_error(t.grad(la)[i], numeric[i], 1e-3), 1e-6);
  }
}

TEST(AutodiffExamples, CapKeepsDirection) {
  Tape tape;
  Var x = tape.leaf(Matrix(1, 3, {1.0, -2.0, 0.5}), true);
  Var weights = tape.constant(Matrix(1, 3, {3e11, 4e11, 1e11}));
  tape.backward(sum(cap_gradient_norm(x, 1e11) * weights));
  const auto g = tape.grad(x);
  const double norm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  EXPECT_NEAR(norm / 1e11, 1.0, 1e-12);
  const double ref = std::sqrt(26.0) * 1e11;
  const double cosine = (g[0] * 3e11 + g[1] * 4e11 + g[2] * 1e11) / (norm * ref);
  EXPECT_NEAR(cosine, 1.0, 1e-12);

  Tape small;
  Var y = small.leaf(Matrix(1, 2, 1.0), true);
  small.backward(sum(cap_gradient_norm(y, 10.0) * 2.0));
  EXPECT_EQ(small.grad(y)[0], 2.0);
}

TEST(AutodiffExamples, BackwardIsLinear) {
  Tape tape;
  Var x = tape.leaf(random_matrix(2, 2, -1, 1, 41), true);
  Var f = sum(exp(x));
  Var g = sum(square(sin(x)));
  tape.backward(f);
  const std::vector<double> gf(tape.grad(x).begin(), tape.grad(x).end());
  tape.backward(g);
  const std::vector<double> gg(tape.grad(x).begin(), tape.grad(x).end());
  tape.backward(2.0 * f - 3.0 * g);
  for (std::size_t i = 0; i < gf.size(); ++i) {
    EXPECT_NEAR(tape.grad(x)[i], 2.0 * gf[i] - 3.0 * gg[i], 1e-12);
  }
}

}  // namespace
}  // namespace depslab::ad
