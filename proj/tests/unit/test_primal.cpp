#include <gtest/gtest.h>

#include <cmath>

#include "txlab/duality_lab.hpp"
#include "txlab/error.hpp"
#include "txlab/generate.hpp"
#include "txlab/primal.hpp"

using namespace txlab;

namespace {

Market one_period(double s_up, double s_down, double p, double lambda) {
  ScenarioTree tree({{0, -1, 0, 1.0}, {1, 0, 1, p}, {2, 0, 1, 1.0 - p}}, 1);
  Process S(3);
  S << 1.0, s_up, s_down;
  return Market(tree, S, lambda);
}

Market random_market(int depth, double lambda, std::uint64_t seed) {
  GeneratorConfig g;
  g.kind = TreeKind::random;
  g.depth = depth;
  g.lambda = lambda;
  g.seed = seed;
  return generate_market(g);
}

/// Frictionless one-period log optimum: ĝ = x p/q with q the martingale measure.
double merton_log_value(double s_up, double s_down, double p, double x) {
  const double q = (1.0 - s_down) / (s_up - s_down);
  return p * std::log(x * p / q) + (1.0 - p) * std::log(x * (1.0 - p) / (1.0 - q));
}

const UtilitySpec kLog = UtilitySpec::log_utility();

}  // namespace

TEST(SolvePrimal, NoTradeWhenConstantPriceIsConsistent) {
  // spreads [0.9, 1], [0.945, 1.05], [0.882, 0.98] share [0.945, 0.98]
  const Market m = one_period(1.05, 0.98, 0.5, 0.1);
  for (const auto& u : {kLog, UtilitySpec::crra(3.0)}) {
    const PrimalSolution s = solve_primal(m, u, 2.0);
    EXPECT_NEAR(s.value, utility(u, 2.0), 1e-9);
    EXPECT_LE((s.terminal_wealth.array() - 2.0).abs().maxCoeff(), 1e-7);
    EXPECT_NEAR(brute_force_primal(m, u, 2.0), utility(u, 2.0), 1e-12);
  }
}

TEST(SolvePrimal, MertonFrictionless) {
  const double up = 1.3, down = 0.8, p = 0.6, x = 1.5;
  const Market m = one_period(up, down, p, 0.0);
  const PrimalSolution s = solve_primal(m, kLog, x);
  EXPECT_NEAR(s.value, merton_log_value(up, down, p, x), 1e-8);
  const double q = (1.0 - down) / (up - down);
  EXPECT_NEAR(s.terminal_wealth[0], x * p / q, 1e-6);
  EXPECT_NEAR(s.terminal_wealth[1], x * (1 - p) / (1 - q), 1e-6);
  EXPECT_NEAR(brute_force_primal(m, kLog, x), merton_log_value(up, down, p, x), 1e-3 * value_scale(s.value, x, 1 / x));
}

TEST(SolvePrimal, LogHomogeneity) {
  const Market m = random_market(3, 0.05, 4);
  const double u1 = solve_primal(m, kLog, 1.0).value;
  for (double c : {0.25, 3.0, 40.0}) EXPECT_NEAR(solve_primal(m, kLog, c).value, u1 + std::log(c), 1e-8);
}

TEST(SolvePrimal, ZeroHorizon) {
  const Market m(ScenarioTree({{0, -1, 0, 1.0}}, 0), Process::Constant(1, 2.0), 0.1);
  for (const auto& u : {kLog, UtilitySpec::crra(0.5)}) {
    EXPECT_DOUBLE_EQ(solve_primal(m, u, 3.0).value, utility(u, 3.0));
    EXPECT_DOUBLE_EQ(brute_force_primal(m, u, 3.0), utility(u, 3.0));
  }
}

TEST(SolvePrimal, AgreesWithBruteForceWideSpread) {
  const Market m = one_period(1.4, 0.7, 0.5, 0.3);
  for (const auto& u : {kLog, UtilitySpec::crra(0.5), UtilitySpec::crra(3.0)}) {
    const PrimalSolution s = solve_primal(m, u, 1.0);
    EXPECT_NEAR(brute_force_primal(m, u, 1.0), s.value, 1e-3 * value_scale(s.value, 1.0, s.marginal)) << u.to_string();
  }
}

TEST(SolvePrimal, AgreesWithBruteForceTwoPeriods) {
  GeneratorConfig g;
  g.depth = 2;
  g.lambda = 0.05;
  const Market m = generate_market(g);
  const PrimalSolution s = solve_primal(m, UtilitySpec::crra(2.0), 1.0);
  EXPECT_NEAR(brute_force_primal(m, UtilitySpec::crra(2.0), 1.0), s.value, 1e-3 * value_scale(s.value, 1.0, s.marginal));
}

TEST(BruteForce, RefusesLargeTrees) {
  GeneratorConfig g;
  g.depth = 3;
  EXPECT_THROW(brute_force_primal(generate_market(g), kLog, 1.0), PreconditionError);
}

TEST(SolvePrimal, SolutionIsAdmissibleAndPositive) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Market m = random_market(2 + seed % 3, 0.1, seed);
    for (const auto& u : {kLog, UtilitySpec::crra(0.5), UtilitySpec::crra(3.0)}) {
      const double x = 0.5 + seed;
      const PrimalSolution s = solve_primal(m, u, x);
      EXPECT_TRUE(is_admissible(m, s.strategy, x, 1e-8 * x).admissible);
      EXPECT_GT(s.terminal_wealth.minCoeff(), 0.0);
      double eu = 0.0;
      const auto leaves = m.tree().leaves();
      for (std::size_t i = 0; i < leaves.size(); ++i) eu += m.tree().prob(leaves[i]) * utility(u, s.terminal_wealth[i]);
      EXPECT_NEAR(s.value, eu, 1e-14 * std::max(1.0, std::abs(eu)));
      const Process liq = liquidation_value(m, s.holdings);
      for (std::size_t i = 0; i < leaves.size(); ++i) EXPECT_NEAR(s.terminal_wealth[i], liq[leaves[i]], 1e-12 * x);
    }
  }
}

TEST(UCurve, MonotoneConcaveAndMarginalsAgree) {
  const Market m = random_market(3, 0.1, 12);
  const double xs[] = {0.5, 1.0, 1.5, 2.0, 3.0};
  for (const auto& u : {kLog, UtilitySpec::crra(0.5), UtilitySpec::crra(3.0)}) {
    const auto c = u_curve(m, u, xs);
    ASSERT_EQ(c.size(), 5u);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LT(c[i - 1].value, c[i].value);
    for (std::size_t i = 2; i < c.size(); ++i) {
      const double s1 = (c[i - 1].value - c[i - 2].value) / (c[i - 1].arg - c[i - 2].arg);
      const double s2 = (c[i].value - c[i - 1].value) / (c[i].arg - c[i - 1].arg);
      EXPECT_LE(s2, s1 + 1e-10);
    }
    for (const auto& pt : c) {
      EXPECT_NEAR(pt.marginal, pt.fd_marginal, std::max(1e-4, 1e-3 * std::abs(pt.marginal))) << u.to_string();
    }
  }
}
