#include "depslab/rulebased.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "depslab/metrics.hpp"

namespace depslab::policy {
namespace {

using ad::Tape;

TEST(RuleBased, BracketingSplitsTheEquilibriumForce) {
  const MsdBracketing p({-0.3, -0.1, 0.0, 0.1, 0.3}, 0.2);
  // omega = 1: a_eq = 0.2, halfway between 0.1 and 0.3.
  const auto mid = p.bracket(1.0);
  EXPECT_EQ(mid.lower, 3u);
  EXPECT_EQ(mid.upper, 4u);
  EXPECT_NEAR(mid.p_upper, 0.5, 1e-12);
  // a_eq above max A is clamped onto 0.3, which is then certain.
  const auto top = p.bracket(1.5);
  EXPECT_EQ(top.upper, 4u);
  EXPECT_EQ(top.p_upper, 1.0);
  // Expectation of the two-point law equals a_eq inside the range.
  const double omega = 0.8;
  const auto b = p.bracket(omega);
  const std::vector<double> a = {-0.3, -0.1, 0.0, 0.1, 0.3};
  EXPECT_NEAR(b.p_upper * a[b.upper] + (1 - b.p_upper) * a[b.lower], omega * omega * 0.2, 1e-15);
}

TEST(RuleBased, BracketingSamplesOnlyTheBracket) {
  const MsdBracketing p({-0.3, -0.1, 0.0, 0.1, 0.3}, 0.2);
  Tape tape;
  const env::State s = {tape.full(1, 4000, 0.2), tape.full(1, 4000, 0.0)};
  const std::vector<ad::Var> design = {tape.constant(1.0)};
  Rng rng = make_rng(0, 0, Purpose::kTest);
  const ActionDraw d = p.sample(tape, {}, {s, 0, design, {}}, rng);
  int upper = 0;
  for (double a : d.action.data) {
    EXPECT_TRUE(a == 0.1 || a == 0.3);
    upper += a == 0.3;
  }
  EXPECT_NEAR(upper / 4000.0, 0.5, 4 * 0.5 / std::sqrt(4000.0));
  for (double lp : d.log_prob.value()) EXPECT_NEAR(lp, std::log(0.5), 1e-12);
}

TEST(RuleBased, CounterSpringPullsBackPastTheReference) {
  const auto msd = env::make_environment("msd");
  const auto p = make_rule_policy(*msd, 2);
  Tape tape;
  const env::State s = {tape.constant(Matrix(1, 3, {0.21, 0.2, 0.15})), tape.full(1, 3, 0.0)};
  Rng rng = make_rng(0, 0, Purpose::kTest);
  const ActionDraw d = p->sample(tape, {}, {s, 0, {}, {}}, rng);
  EXPECT_EQ(d.action.data, (std::vector<double>{-0.3, 0.0, 0.0}));
}

TEST(RuleBased, GreedyDispatch) {
  const MicrogridRule greedy(MicrogridRule::Kind::kGreedy);
  // PV surplus of 30 with 20 headroom: charge 20, genset off.
  auto [b1, g1] = greedy.decide(80, 10, 40, 100, 5);
  EXPECT_EQ(b1, 20.0);
  EXPECT_EQ(g1, 0.0);
  // Deficit of 10 covered by the battery.
  auto [b2, g2] = greedy.decide(50, 30, 20, 100, 5);
  EXPECT_EQ(b2, -10.0);
  EXPECT_EQ(g2, 0.0);
  // Deficit beyond the stored energy: drain and run the genset, capped.
  auto [b3, g3] = greedy.decide(4, 30, 20, 100, 5);
  EXPECT_EQ(b3, -4.0);
  EXPECT_EQ(g3, 5.0);
}

TEST(RuleBased, FullGensetDispatch) {
  const MicrogridRule full(MicrogridRule::Kind::kFullGenset);
  auto [b1, g1] = full.decide(50, 10, 5, 100, 8);
  EXPECT_EQ(b1, 3.0);
  EXPECT_EQ(g1, 8.0);
  auto [b2, g2] = full.decide(2, 30, 5, 100, 8);
  EXPECT_EQ(b2, -2.0);
  EXPECT_EQ(g2, 8.0);
}

TEST(RuleBased, FactoryRejectsUnsupportedCombinations) {
  const auto msd = env::make_environment("msd");
  const auto mg = env::make_environment("microgrid");
  const auto drone = env::make_environment("drone");
  EXPECT_EQ(make_rule_policy(*msd, 1)->architecture(), "rule msd1");
  EXPECT_EQ(make_rule_policy(*mg, 2)->architecture(), "rule mg2");
  EXPECT_THROW(make_rule_policy(*drone, 1), std::invalid_argument);
  EXPECT_THROW(make_rule_policy(*msd, 3), std::invalid_argument);
}

TEST(RuleBased, CounterSpringAtTheTargetDesignScoresAbove99) {
  const auto msd = env::make_environment("msd");
  const auto p = make_rule_policy(*msd, 2);
  Rng rng = make_rng(0, 0, Purpose::kEval);
  const std::vector<double> psi = {0.5, 0.5, 0.5, -0.3, 0.2};
  const auto stats = metrics::expected_return(*msd, psi, *p, {}, 64, rng);
  EXPECT_GE(stats.mean, 99.0);
  EXPECT_LE(stats.mean, 100.0);
}

}  // namespace
}  // namespace depslab::policy
