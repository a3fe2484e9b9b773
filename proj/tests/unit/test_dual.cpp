#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "txlab/dual.hpp"
#include "txlab/error.hpp"
#include "txlab/generate.hpp"

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

/// One-period frictional dual by direct search over the up-weight q. q is
/// feasible when the attainable range of Σ q S̃ over the leaf spreads meets
/// the root spread; the objective is convex in q.
double one_period_dual_oracle(const Market& m, const UtilitySpec& u, double y) {
  const double p = m.tree().cond_prob(1);
  auto feasible = [&](double q) {
    const double lo = q * m.bid(1) + (1 - q) * m.bid(2), hi = q * m.ask(1) + (1 - q) * m.ask(2);
    return lo <= m.ask(0) && hi >= m.bid(0);
  };
  auto f = [&](double q) { return p * conjugate(u, y * q / p) + (1 - p) * conjugate(u, y * (1 - q) / (1 - p)); };
  double a = 1.0, b = 0.0;
  const int n = 20000;
  for (int i = 1; i < n; ++i) {
    const double q = double(i) / n;
    if (feasible(q)) {
      a = std::min(a, q);
      b = std::max(b, q);
    }
  }
  // feasible set is [a, b] up to the grid; refine its ends by bisection
  auto edge = [&](double in, double out) {
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (in + out);
      (feasible(mid) ? in : out) = mid;
    }
    return in;
  };
  a = edge(a, a - 1.0 / n);
  b = edge(b, b + 1.0 / n);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = a, hi = b;
  for (int k = 0; k < 200; ++k) {
    const double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    if (f(c) < f(d)) {
      hi = d;
    } else {
      lo = c;
    }
  }
  return f(0.5 * (lo + hi));
}

const UtilitySpec kLog = UtilitySpec::log_utility();

}  // namespace

TEST(SolveDual, FrictionlessUniqueMeasure) {
  const double up = 1.3, down = 0.8, p = 0.6, y = 0.7;
  const Market m = one_period(up, down, p, 0.0);
  const double q = (1.0 - down) / (up - down);
  for (const auto& u : {kLog, UtilitySpec::crra(0.5), UtilitySpec::crra(3.0)}) {
    const DualSolution d = solve_dual(m, u, y);
    const double v = p * conjugate(u, y * q / p) + (1 - p) * conjugate(u, y * (1 - q) / (1 - p));
    EXPECT_NEAR(d.value, v, 1e-9 * std::max(1.0, std::abs(v))) << u.to_string();
    EXPECT_NEAR(d.terminal_density[0], y * q / p, 1e-8);
  }
}

TEST(SolveDual, FrictionalOnePeriodMatchesLineSearch) {
  for (double lam : {0.02, 0.1, 0.3}) {
    const Market m = one_period(1.25, 0.85, 0.45, lam);
    for (const auto& u : {kLog, UtilitySpec::crra(0.5), UtilitySpec::crra(3.0)}) {
      const double oracle = one_period_dual_oracle(m, u, 1.0);
      EXPECT_NEAR(solve_dual(m, u, 1.0).value, oracle, 1e-7 * std::max(1.0, std::abs(oracle)))
          << u.to_string() << " lambda=" << lam;
    }
  }
}

TEST(SolveDual, BoundaryMeasureAtSpreadEdge) {
  // leaves straddle the ask only barely, forcing S̃0 to the ask
  const Market m = one_period(1.02, 0.6, 0.5, 0.05);
  const double oracle = one_period_dual_oracle(m, kLog, 2.0);
  EXPECT_NEAR(solve_dual(m, kLog, 2.0).value, oracle, 1e-7 * std::max(1.0, std::abs(oracle)));
}

TEST(IsCps, ConstantPriceSystem) {
  const Market m = one_period(1.05, 0.98, 0.5, 0.1);
  const PriceSystem z{Process::Ones(3), Process::Constant(3, 0.96)};
  const CpsReport r = is_cps(m, z, 1e-12);
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.martingale_residual, 0.0);
  EXPECT_EQ(r.spread_violation, 0.0);
}

TEST(IsCps, ReportsViolations) {
  const Market m = random_market(3, 0.1, 2);
  const DualSolution d = solve_dual(m, kLog, 1.0);
  EXPECT_TRUE(is_cps(m, d.price_system, 1e-8).feasible);

  PriceSystem wide = d.price_system;
  wide.z1 *= 1.2;
  const CpsReport a = is_cps(m, wide, 1e-8);
  EXPECT_FALSE(a.feasible);
  EXPECT_GT(a.spread_violation, 1e-3);

  PriceSystem bumped = d.price_system;
  bumped.z0[m.tree().level(2)[0]] *= 1.05;
  const CpsReport b = is_cps(m, bumped, 1e-8);
  EXPECT_FALSE(b.feasible);
  EXPECT_GT(b.martingale_residual, 1e-3);
}

TEST(IsDeflator, Cases) {
  const Market m = random_market(3, 0.1, 5);
  const DualSolution d = solve_dual(m, UtilitySpec::crra(2.0), 1.5);
  EXPECT_TRUE(is_deflator(m, d.deflator(), 1e-8).deflator);

  Deflator dec = d.deflator();
  for (int n = 0; n < m.tree().size(); ++n) {
    const double f = 1.0 - 0.05 * m.tree().time(n);
    dec.y0[n] *= f;
    dec.y1[n] *= f;
  }
  const DeflatorReport ok = is_deflator(m, dec, 1e-8);
  EXPECT_TRUE(ok.deflator);
  EXPECT_EQ(ok.supermartingale_violation, 0.0);

  Deflator out = d.deflator();
  out.y1 *= 1.25;
  const DeflatorReport bad = is_deflator(m, out, 1e-8);
  EXPECT_FALSE(bad.deflator);
  EXPECT_GT(bad.spread_violation, 0.0);
}

TEST(SolveDual, SolutionIsConsistent) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Market m = random_market(2 + seed % 3, 0.05 * seed, seed);
    for (const auto& u : {kLog, UtilitySpec::crra(0.5), UtilitySpec::crra(3.0)}) {
      const DualSolution d = solve_dual(m, u, 0.8);
      EXPECT_TRUE(is_cps(m, d.price_system, 1e-8).feasible);
      EXPECT_TRUE(is_deflator(m, d.deflator(), 1e-8).deflator);
      double ev = 0.0;
      const auto leaves = m.tree().leaves();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        EXPECT_NEAR(d.terminal_density[i], 0.8 * d.price_system.z0[leaves[i]], 1e-15);
        ev += m.tree().prob(leaves[i]) * conjugate(u, d.terminal_density[i]);
      }
      EXPECT_NEAR(d.value, ev, 1e-14 * std::max(1.0, std::abs(ev)));
    }
  }
}

TEST(VCurve, ConvexAndLogShift) {
  const Market m = random_market(3, 0.1, 8);
  const double ys[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  const auto c = v_curve(m, kLog, ys);
  ASSERT_EQ(c.size(), 5u);
  const double v1 = c[2].value;
  for (const auto& pt : c) EXPECT_NEAR(pt.value, v1 - std::log(pt.arg), 1e-8);
  for (const auto& u : {UtilitySpec::crra(0.5), UtilitySpec::crra(3.0)}) {
    const auto k = v_curve(m, u, ys);
    for (std::size_t i = 2; i < k.size(); ++i) {
      const double s1 = (k[i - 1].value - k[i - 2].value) / (k[i - 1].arg - k[i - 2].arg);
      const double s2 = (k[i].value - k[i - 1].value) / (k[i].arg - k[i - 1].arg);
      EXPECT_GE(s2, s1 - 1e-10);
    }
  }
}

TEST(SolveDual, LogDensityIndependentOfY) {
  const Market m = random_market(3, 0.1, 10);
  const DualSolution a = solve_dual(m, kLog, 0.3), b = solve_dual(m, kLog, 3.0);
  EXPECT_LE((a.price_system.z0 - b.price_system.z0).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(ConjugateCrossCheck, SmallGap) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Market m = random_market(3, 0.1, seed);
    const ConjugateCheck c = conjugate_cross_check(m, UtilitySpec::crra(3.0), 1.0);
    EXPECT_GE(c.gap, -1e-12);
    EXPECT_LE(c.gap, 1e-5 * std::max(std::abs(c.u), c.y_star));
  }
}

TEST(SolveDual, InfeasibleMarket) {
  const Market m = one_period(1.5, 1.6, 0.5, 0.1);
  EXPECT_THROW(solve_dual(m, kLog, 1.0), InfeasibilityError);
}
