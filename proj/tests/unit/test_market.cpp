#include <gtest/gtest.h>

#include <random>

#include "txlab/cps.hpp"
#include "txlab/error.hpp"
#include "txlab/generate.hpp"
#include "txlab/market.hpp"

using namespace txlab;

namespace {

/// Root S = 1, two leaves at S = 2 and S = 0.5.
Market one_period(double lambda) {
  ScenarioTree tree({{0, -1, 0, 1.0}, {1, 0, 1, 0.5}, {2, 0, 1, 0.5}}, 1);
  Process S(3);
  S << 1.0, 2.0, 0.5;
  return Market(tree, S, lambda);
}

Market generated(int depth, double lambda, std::uint64_t seed) {
  GeneratorConfig g;
  g.kind = TreeKind::random;
  g.depth = depth;
  g.lambda = lambda;
  g.seed = seed;
  return generate_market(g);
}

}  // namespace

TEST(Market, RejectsBadInputs) {
  ScenarioTree tree({{0, -1, 0, 1.0}}, 0);
  EXPECT_THROW(Market(tree, Process::Ones(1), 1.0), DomainError);
  EXPECT_THROW(Market(tree, Process::Ones(1), -0.1), DomainError);
  EXPECT_THROW(Market(tree, -Process::Ones(1), 0.1), DomainError);
  EXPECT_THROW(Market(tree, Process::Ones(2), 0.1), StructuralError);
  EXPECT_NO_THROW(Market(tree, Process::Ones(1), 0.0));
}

TEST(Holdings, ZeroStrategy) {
  const Market m = one_period(0.1);
  const HoldingsProcess h = holdings(m, TradingStrategy::zero(m.tree()), 3.0);
  EXPECT_EQ((h.bond.array() - 3.0).abs().maxCoeff(), 0.0);
  EXPECT_EQ(h.stock.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Holdings, BuyOneShareAtRoot) {
  const Market m = one_period(0.1);
  TradingStrategy s = TradingStrategy::zero(m.tree());
  s.buy[0] = 1.0;
  const HoldingsProcess h = holdings(m, s, 2.0);
  EXPECT_DOUBLE_EQ(h.bond[0], 1.0);
  EXPECT_DOUBLE_EQ(h.stock[0], 1.0);
}

TEST(Holdings, BuyHoldSell) {
  const double lam = 0.1, x = 2.0;
  const Market m = one_period(lam);
  TradingStrategy s = TradingStrategy::zero(m.tree());
  s.buy[0] = 1.0;
  s.sell[1] = 1.0;
  const HoldingsProcess h = holdings(m, s, x);
  EXPECT_NEAR(h.bond[1], x - 1.0 + 2.0 * (1.0 - lam), 1e-15);
  EXPECT_EQ(h.stock[1], 0.0);
}

TEST(Liquidation, NoStockIsBond) {
  const Market m = one_period(0.2);
  HoldingsProcess h{Process::Constant(3, 0.7), Process::Zero(3)};
  EXPECT_EQ((liquidation_value(m, h).array() - 0.7).abs().maxCoeff(), 0.0);
}

TEST(Liquidation, SandwichLongStrategyBreaksEven) {
  // φ⁰ = −(1−λ)(1−ε), φ¹ = 1/S_σ, evaluated where S = (1−ε)S_σ.
  const double lam = 0.1, eps = 0.25, s_sigma = 2.0;
  ScenarioTree tree({{0, -1, 0, 1.0}}, 0);
  const Market m(tree, Process::Constant(1, (1.0 - eps) * s_sigma), lam);
  HoldingsProcess h{Process::Constant(1, -(1.0 - lam) * (1.0 - eps)), Process::Constant(1, 1.0 / s_sigma)};
  EXPECT_NEAR(liquidation_value(m, h)[0], 0.0, 1e-16);
}

TEST(Liquidation, MatchesHandFormula) {
  const Market m = generated(2, 0.15, 3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  HoldingsProcess h{Process(m.tree().size()), Process(m.tree().size())};
  for (int n = 0; n < m.tree().size(); ++n) {
    h.bond[n] = U(rng);
    h.stock[n] = U(rng);
  }
  const Process liq = liquidation_value(m, h);
  for (int n = 0; n < m.tree().size(); ++n) {
    const double phi1 = h.stock[n];
    const double expect = h.bond[n] + (phi1 > 0 ? phi1 * 0.85 * m.price()[n] : phi1 * m.price()[n]);
    EXPECT_NEAR(liq[n], expect, 1e-15);
  }
}

TEST(Admissibility, ZeroAndLeveraged) {
  const Market m = one_period(0.1);
  EXPECT_TRUE(is_admissible(m, TradingStrategy::zero(m.tree()), 1.0, 1e-12).admissible);
  TradingStrategy s = TradingStrategy::zero(m.tree());
  s.buy[0] = 1.0 / m.price()[0] + 1.0;
  const AdmissibilityReport r = is_admissible(m, s, 1.0, 1e-12);
  EXPECT_FALSE(r.admissible);
  EXPECT_LT(r.worst_value, 0.0);
}

TEST(SelfFinancing, EqualityAndDisposal) {
  const Market m = generated(3, 0.1, 9);
  TradingStrategy s = TradingStrategy::zero(m.tree());
  s.buy[0] = 0.3;
  for (int n : m.tree().level(1)) s.sell[n] = 0.1;
  HoldingsProcess h = holdings(m, s, 1.0);
  const SelfFinancingReport ok = check_self_financing(m, h, 1e-14, 1.0);
  EXPECT_TRUE(ok.ok);
  EXPECT_LE(ok.max_violation, 1e-14);

  HoldingsProcess inflated = h;
  const int node = m.tree().level(2)[0];
  inflated.bond[node] += 1.0;
  const SelfFinancingReport bad = check_self_financing(m, inflated, 1e-12, 1.0);
  EXPECT_FALSE(bad.ok);
  EXPECT_NEAR(bad.max_violation, 1.0, 1e-12);

  HoldingsProcess disposed = h;
  for (int n : m.tree().leaves()) disposed.bond[n] -= 0.5;  // cash thrown away at the end
  EXPECT_TRUE(check_self_financing(m, disposed, 1e-12, 1.0).ok);
}

TEST(StrictlyConsistentPrices, GeneratedMarketsAreFeasible) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (double lam : {0.0, 0.01, 0.3}) {
      const Market m = generated(1 + static_cast<int>(seed % 4), lam, seed);
      const StrictCps c = strictly_consistent_prices(m);
      const auto& tree = m.tree();
      for (int n = 0; n < tree.size(); ++n) {
        EXPECT_GT(c.q[n], 0.0);
        EXPECT_LE(c.ratio[n], m.ask(n) * (1 + 1e-14));
        EXPECT_GE(c.ratio[n], m.bid(n) * (1 - 1e-14));
        if (lam > 0.0) {
          EXPECT_LT(c.ratio[n], m.ask(n));
          EXPECT_GT(c.ratio[n], m.bid(n));
        }
      }
      for (int n : tree.interior()) {
        double qs = 0.0, ms = 0.0;
        for (int ch : tree.children(n)) {
          qs += c.cond_q[ch];
          ms += c.cond_q[ch] * c.ratio[ch];
        }
        EXPECT_NEAR(qs, 1.0, 1e-13);
        EXPECT_NEAR(ms, c.ratio[n], 1e-12 * c.ratio[n]);
      }
    }
  }
}

TEST(StrictlyConsistentPrices, ArbitrageIsReported) {
  ScenarioTree tree({{0, -1, 0, 1.0}, {1, 0, 1, 0.5}, {2, 0, 1, 0.5}}, 1);
  Process S(3);
  S << 1.0, 1.5, 1.6;  // bids at t = 1 exceed the ask at t = 0
  const Market m(tree, S, 0.1);
  try {
    strictly_consistent_prices(m);
    FAIL() << "expected InfeasibilityError";
  } catch (const InfeasibilityError& e) {
    EXPECT_EQ(e.node(), 0);
    EXPECT_GT(e.attainable_lo(), m.ask(0));
  }
}
