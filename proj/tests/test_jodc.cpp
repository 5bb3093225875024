#include "depslab/jodc.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace depslab::algo {
namespace {

using testing::ToyOracle;

DesignDistribution sample_distribution() {
  DesignDistribution p;
  p.mean = {0.4, -0.3};
  p.log_std = {std::log(0.2), std::log(0.5)};
  p.floor = {1e-3, 1e-3};
  return p;
}

double weighted_loss(const DesignDistribution& p, const Matrix& z, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t j = 0; j < z.cols; ++j) total -= w[j] * p.log_density(z, j);
  return total / static_cast<double>(z.cols);
}

TEST(Jodc, LogDensityIsTheIndependentNormal) {
  const DesignDistribution p = sample_distribution();
  Matrix z(2, 1);
  z(0, 0) = 0.5;
  z(1, 0) = 0.2;
  const auto sd = p.std();
  double expected = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double u = (z(i, 0) - p.mean[i]) / sd[i];
    expected += std::log(std::exp(-0.5 * u * u) / (sd[i] * std::sqrt(2 * M_PI)));
  }
  EXPECT_NEAR(p.log_density(z, 0), expected, 1e-12);
}

TEST(Jodc, LossGradientMatchesFiniteDifferences) {
  const DesignDistribution p = sample_distribution();
  Matrix z(2, 4);
  const double values[2][4] = {{0.1, 0.7, 0.45, -0.2}, {-1.0, 0.3, 0.0, -0.4}};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) z(i, j) = values[i][j];
  }
  const std::vector<double> w = {1.5, -0.5, 2.0, 0.25};
  const auto grad = p.loss_gradient(z, w);
  ASSERT_EQ(grad.size(), 4u);
  const auto fd = testing::central_difference(
      [&](std::vector<double> x) {
        DesignDistribution q = p;
        q.mean = {x[0], x[1]};
        q.log_std = {x[2], x[3]};
        return weighted_loss(q, z, w);
      },
      {p.mean[0], p.mean[1], p.log_std[0], p.log_std[1]}, 1e-6);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(grad[k], fd[k], 1e-7) << k;
}

TEST(Jodc, StdNeverFallsBelowTheFloor) {
  DesignDistribution p = sample_distribution();
  p.log_std = {-800.0, -50.0};
  const auto sd = p.std();
  EXPECT_GE(sd[0], p.floor[0]);
  EXPECT_GE(sd[1], p.floor[1]);
  EXPECT_TRUE(std::isfinite(p.log_density(Matrix(2, 1, 0.4), 0)));
}

TEST(Jodc, SampledDesignsAreClippedIntoPsi) {
  const auto environment = env::make_environment("msd");
  const auto& d = environment->descriptor();
  Rng rng = make_rng(1, 0, Purpose::kTest);
  DesignDistribution p = DesignDistribution::initial(d, 0.25, rng);
  for (double& l : p.log_std) l += std::log(20.0);  // wide enough to leave the box often
  const auto draw = p.sample(d, 500, rng);
  bool clipped = false;
  for (std::size_t j = 0; j < 500; ++j) {
    std::vector<double> psi(d.design_dim());
    for (std::size_t i = 0; i < psi.size(); ++i) {
      psi[i] = draw.designs(i, j);
      const double raw = draw.z(i, j) * d.design_scale[i];
      if (raw != psi[i]) clipped = true;
      else EXPECT_EQ(raw, psi[i]);
    }
    EXPECT_TRUE(d.design_space.contains(psi));
  }
  EXPECT_TRUE(clipped);
  EXPECT_TRUE(d.design_space.contains(p.mode(d)));
}

TEST(Jodc, InitialStdIsAFractionOfTheRange) {
  const auto environment = env::make_environment("drone");
  const auto& d = environment->descriptor();
  Rng rng = make_rng(2, 0, Purpose::kTest);
  const DesignDistribution p = DesignDistribution::initial(d, 0.25, rng);
  const auto sd = p.std();
  for (std::size_t i = 0; i < sd.size(); ++i) {
    const double range = (d.design_space.upper[i] - d.design_space.lower[i]) / d.design_scale[i];
    EXPECT_NEAR(sd[i], 0.25 * range, 1e-5 * range);
  }
  EXPECT_THROW(DesignDistribution::initial(d, 0.0, rng), std::invalid_argument);
}

struct ToyBatch {
  std::unique_ptr<env::Environment> environment = env::make_environment("toy");
  std::unique_ptr<policy::Policy> policy = policy::make_policy(*environment);
  Matrix designs;
  std::vector<double> theta_old;
  HistoryBatch batch;
  ad::Tape tape;

  explicit ToyBatch(std::size_t m) : designs(2, m) {
    for (std::size_t j = 0; j < m; ++j) {
      designs(0, j) = 0.2;
      designs(1, j) = 0.1;
    }
    for (std::size_t i = 0; i < 10; ++i) theta_old.push_back(0.2 * std::cos(1.3 * i));
    const auto psi = design_columns(tape, designs, false);
    const ad::Var th = tape.leaf(theta_old, theta_old.size(), 1, false);
    Rng rng = make_rng(3, 0, Purpose::kTest);
    batch = generate_histories(tape, {*environment, *policy, psi, th}, m, rng, nullptr, true);
  }

  int context(std::size_t t, std::size_t m) const {
    return t == 0 ? 0 : ToyOracle::context_of(batch.states[t](0, m));
  }
  int action(std::size_t t, std::size_t m) const {
    return static_cast<int>(batch.draws.raw_actions[t](0, m));
  }
};

TEST(Jodc, PpoSurrogateMatchesTheClippedObjective) {
  ToyBatch b(24);
  std::vector<double> theta = b.theta_old;
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += 0.4 * std::sin(2.1 * i + 1.0);
  const double clip = 0.1;

  ad::Tape tape;
  const ad::Var th = tape.leaf(theta, theta.size(), 1, true);
  const double loss = ppo_loss(tape, *b.environment, *b.policy, b.designs, b.batch, th, clip).item();

  const double baseline = mean_of(b.batch.return_values);
  double expected = 0.0;
  for (std::size_t m = 0; m < 24; ++m) {
    const double adv = b.batch.return_values[m] - baseline;
    for (std::size_t t = 0; t < 2; ++t) {
      const int c = b.context(t, m), a = b.action(t, m);
      const double r = ToyOracle::prob(theta, c, a) / ToyOracle::prob(b.theta_old, c, a);
      expected += std::min(r * adv, std::clamp(r, 1 - clip, 1 + clip) * adv);
    }
  }
  EXPECT_NEAR(loss, -expected / 48.0, 1e-12);
}

TEST(Jodc, ClippedTermsCarryNoGradient) {
  // Only terms whose ratio sits inside the trust region, or on the side where
  // the unclipped branch is the minimum, contribute r A grad log pi.
  ToyBatch b(24);
  std::vector<double> theta = b.theta_old;
  for (std::size_t c = 0; c < 5; ++c) theta[5 + c] += 0.3;
  const double clip = 0.1;
  ad::Tape tape;
  const ad::Var th = tape.leaf(theta, theta.size(), 1, true);
  tape.backward(ppo_loss(tape, *b.environment, *b.policy, b.designs, b.batch, th, clip));
  const auto grad = tape.grad(th);

  const double baseline = mean_of(b.batch.return_values);
  std::vector<double> expected(10, 0.0);
  std::size_t clipped = 0;
  for (std::size_t m = 0; m < 24; ++m) {
    const double adv = b.batch.return_values[m] - baseline;
    for (std::size_t t = 0; t < 2; ++t) {
      const int c = b.context(t, m), a = b.action(t, m);
      const double r = ToyOracle::prob(theta, c, a) / ToyOracle::prob(b.theta_old, c, a);
      if ((adv > 0 && r > 1 + clip) || (adv < 0 && r < 1 - clip)) {
        ++clipped;
        continue;
      }
      for (int k = 0; k < 2; ++k) {
        const double score = (k == a ? 1.0 : 0.0) - ToyOracle::prob(theta, c, k);
        expected[static_cast<std::size_t>(5 * k + c)] -= r * adv * score / 48.0;
      }
    }
  }
  EXPECT_GT(clipped, 0u);
  EXPECT_LT(clipped, 48u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(grad[i], expected[i], 1e-12) << i;
}

TEST(Jodc, PpoGradientAtTheOldPolicyIsThePolicyGradient) {
  ToyBatch b(32);
  ad::Tape tape;
  const ad::Var th = tape.leaf(b.theta_old, b.theta_old.size(), 1, true);
  const ad::Var loss = ppo_loss(tape, *b.environment, *b.policy, b.designs, b.batch, th, 0.1);
  EXPECT_NEAR(loss.item(), 0.0, 1e-12);
  tape.backward(loss);
  const auto grad = tape.grad(th);
  const double baseline = mean_of(b.batch.return_values);
  std::vector<double> expected(10, 0.0);
  for (std::size_t m = 0; m < 32; ++m) {
    const double adv = b.batch.return_values[m] - baseline;
    for (std::size_t t = 0; t < 2; ++t) {
      const int c = b.context(t, m), a = b.action(t, m);
      for (int k = 0; k < 2; ++k) {
        const double score = (k == a ? 1.0 : 0.0) - ToyOracle::prob(b.theta_old, c, k);
        expected[static_cast<std::size_t>(5 * k + c)] -= score * adv / 64.0;
      }
    }
  }
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(grad[i], expected[i], 1e-12) << i;
}

TEST(Jodc, PpoNeedsKeptStates) {
  const auto environment = env::make_environment("toy");
  const auto pol = policy::make_policy(*environment);
  ad::Tape tape;
  const auto psi = env::design_leaves(tape, std::vector<double>{0.1, 0.1}, false);
  const std::vector<double> theta(10, 0.0);
  const ad::Var th = tape.leaf(theta, 10, 1, true);
  Rng rng = make_rng(4, 0, Purpose::kTest);
  const HistoryBatch h = generate_histories(tape, {*environment, *pol, psi, th}, 4, rng);
  EXPECT_THROW(ppo_loss(tape, *environment, *pol, Matrix(2, 4, 0.1), h, th, 0.1),
               std::invalid_argument);
}

TEST(Jodc, ToyRunImprovesAndIsDeterministic) {
  const auto environment = env::make_environment("toy");
  const auto pol = policy::make_policy(*environment);
  JodcConfig c;
  c.iterations = 300;
  c.batch = 32;
  c.policy_step = 0.05;
  c.eval_every = 100;
  c.eval_samples = 256;
  c.seed = 7;
  const JodcResult a = jodc_train(*environment, *pol, c);
  const JodcResult b = jodc_train(*environment, *pol, c);
  ASSERT_EQ(a.curve.size(), 3u);
  EXPECT_GT(a.final.stats.mean, a.curve.front().stats.mean + 0.2);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.distribution.mean, b.distribution.mean);
  for (const auto& row : a.curve) {
    EXPECT_TRUE(environment->descriptor().design_space.contains(row.design));
  }
}

TEST(Jodc, ConditionedPolicyMustMatchTheConfig) {
  const auto environment = env::make_environment("msd");
  const auto plain = policy::make_policy(*environment, false);
  const auto conditioned = policy::make_policy(*environment, true);
  JodcConfig c;
  c.iterations = 1;
  c.batch = 2;
  c.eval_samples = 2;
  c.condition_on_design = true;
  EXPECT_THROW(jodc_train(*environment, *plain, c), std::invalid_argument);
  c.condition_on_design = false;
  EXPECT_THROW(jodc_train(*environment, *conditioned, c), std::invalid_argument);
  c.condition_on_design = true;
  EXPECT_NO_THROW(jodc_train(*environment, *conditioned, c));
}

}  // namespace
}  // namespace depslab::algo
