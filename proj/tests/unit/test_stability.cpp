#include <gtest/gtest.h>

#include <cmath>

#include "txlab/error.hpp"
#include "txlab/generate.hpp"
#include "txlab/stability.hpp"

using namespace txlab;

namespace {

Market binomial(int depth, double lambda) {
  GeneratorConfig g;
  g.depth = depth;
  g.lambda = lambda;
  return generate_market(g);
}

PerturbationSchedule schedule_for(const Market& m, const UtilitySpec& u, double theta, int N) {
  PerturbationSchedule s;
  s.x = 1.0;
  s.y = marginal_utility(u, 1.0);
  s.base = u;
  s.theta = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m.tree().interior().size()), theta);
  s.N = N;
  return s;
}

}  // namespace

TEST(Tilt, ZeroIsIdentity) {
  const Market m = binomial(3, 0.1);
  const MeasureTilt t = tilt_measure(m.tree(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.tree().interior().size())));
  EXPECT_EQ(t.tv, 0.0);
  EXPECT_EQ((t.density.array() - 1.0).abs().maxCoeff(), 0.0);
  for (int n = 0; n < m.tree().size(); ++n) EXPECT_EQ(t.tree.prob(n), m.tree().prob(n));
}

TEST(Tilt, OnePeriodClosedForm) {
  const ScenarioTree tree({{0, -1, 0, 1.0}, {1, 0, 1, 0.5}, {2, 0, 1, 0.5}}, 1);
  const MeasureTilt t = tilt_measure(tree, Eigen::VectorXd::Constant(1, std::atanh(0.2)));
  EXPECT_NEAR(t.tree.cond_prob(1), 0.6, 1e-15);
  EXPECT_NEAR(t.tree.cond_prob(2), 0.4, 1e-15);
  EXPECT_NEAR(t.terminal_density[0], 1.2, 1e-15);
  EXPECT_NEAR(t.terminal_density[1], 0.8, 1e-15);
  EXPECT_NEAR(t.tv, 0.1, 1e-15);
}

TEST(Tilt, DensityIsMartingaleAndRejectsHugeTheta) {
  const Market m = binomial(4, 0.1);
  const auto k = static_cast<Eigen::Index>(m.tree().interior().size());
  const MeasureTilt t = tilt_measure(m.tree(), Eigen::VectorXd::LinSpaced(k, -0.8, 0.8));
  EXPECT_EQ(classify_martingale(m.tree(), t.density, 1e-13).kind, MartingaleKind::martingale);
  EXPECT_DOUBLE_EQ(t.density[0], 1.0);
  EXPECT_THROW(tilt_measure(m.tree(), Eigen::VectorXd::Constant(k, 1e4)), TiltTooLargeError);
  EXPECT_THROW(tilt_measure(m.tree(), Eigen::VectorXd::Zero(k + 1)), StructuralError);
}

TEST(Tilt, TotalVariationHalves) {
  const Market m = binomial(3, 0.1);
  PerturbationSchedule s = schedule_for(m, UtilitySpec::log_utility(), 0.3, 10);
  double prev = tilt_measure(m.tree(), s.theta_n(1)).tv;
  for (int n = 2; n <= 10; ++n) {
    const double tv = tilt_measure(m.tree(), s.theta_n(n)).tv;
    EXPECT_NEAR(tv / prev, 0.5, 0.05);
    prev = tv;
  }
}

TEST(L0Distance, CappedAtOne) {
  const ScenarioTree tree({{0, -1, 0, 1.0}, {1, 0, 1, 0.25}, {2, 0, 1, 0.75}}, 1);
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 5.0, 0.5;
  EXPECT_DOUBLE_EQ(l0_distance(tree, a, b), 0.25 + 0.75 * 0.5);
  EXPECT_EQ(l0_distance(tree, a, a), 0.0);
}

TEST(Schedule, Elements) {
  PerturbationSchedule s;
  s.x = 2.0;
  s.y = 0.5;
  s.base = UtilitySpec::crra(2.0);
  EXPECT_DOUBLE_EQ(s.x_n(0), 2.4);
  EXPECT_DOUBLE_EQ(s.y_n(1), 0.55);
  EXPECT_DOUBLE_EQ(s.utility_n(0).gamma, 3.0);
  s.N = 0;
  EXPECT_THROW(s.validate(ScenarioTree({{0, -1, 0, 1.0}}, 0)), ConfigError);
}

TEST(Static, ZeroScheduleHasNoError) {
  const Market m = binomial(3, 0.1);
  PerturbationSchedule s = schedule_for(m, UtilitySpec::crra(3.0), 0.0, 4);
  s.a = s.b = s.kappa = 0.0;
  s.theta.resize(0);
  const StabilityReport r = run_static(m, s);
  ASSERT_EQ(r.rows.size(), 4u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.err_u, 0.0);
    EXPECT_EQ(row.err_v, 0.0);
    EXPECT_EQ(row.d_primal, 0.0);
    EXPECT_EQ(row.tv, 0.0);
  }
}

TEST(Static, GammaOnlyDecays) {
  const Market m = binomial(3, 0.1);
  PerturbationSchedule s = schedule_for(m, UtilitySpec::crra(2.0), 0.0, 10);
  s.a = s.b = 0.0;
  s.theta.resize(0);
  const StabilityReport r = run_static(m, s);
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    EXPECT_LT(r.rows[i].err_u, r.rows[i - 1].err_u);
    EXPECT_LT(r.rows[i].err_v, r.rows[i - 1].err_v);
  }
  EXPECT_TRUE(r.pass());
}

TEST(Static, FullScheduleAndThreadDeterminism) {
  const Market m = binomial(3, 0.1);
  const PerturbationSchedule s = schedule_for(m, UtilitySpec::log_utility(), 0.3, 10);
  StabilityOptions one, three;
  three.threads = 3;
  const StabilityReport a = run_static(m, s, one), b = run_static(m, s, three);
  EXPECT_TRUE(a.pass());
  EXPECT_NEAR(a.rates.tv, 0.5, 0.05);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].u, b.rows[i].u);
    EXPECT_EQ(a.rows[i].v, b.rows[i].v);
    EXPECT_EQ(a.rows[i].d_primal, b.rows[i].d_primal);
    EXPECT_EQ(a.rows[i].d_dual, b.rows[i].d_dual);
  }
  EXPECT_EQ(stability_csv(a), stability_csv(b));
}

TEST(MeasureChange, RoundTripAndDeflatorProperty) {
  const Market m = binomial(3, 0.1);
  const auto k = static_cast<Eigen::Index>(m.tree().interior().size());
  const MeasureTilt t = tilt_measure(m.tree(), Eigen::VectorXd::Constant(k, 0.4));
  const DualSolution d = solve_dual(m, UtilitySpec::log_utility(), 1.0);
  const Deflator there = deflator_measure_change(d.deflator(), t, MeasureDirection::to_tilted);
  const Deflator back = deflator_measure_change(there, t, MeasureDirection::to_base);
  EXPECT_LE((back.y0 - d.deflator().y0).lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_LE((back.y1 - d.deflator().y1).lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_TRUE(is_deflator(m.with_tree(t.tree), there, 1e-10).deflator);
  const PriceSystem z = price_system_measure_change(d.price_system, t, MeasureDirection::to_tilted);
  EXPECT_TRUE(is_cps(m.with_tree(t.tree), z, 1e-10).feasible);
}

TEST(Uiz, FiniteOnTrees) {
  const Market m = binomial(3, 0.1);
  const PerturbationSchedule s = schedule_for(m, UtilitySpec::crra(0.5), 0.3, 10);
  const DualSolution d = solve_dual(m, UtilitySpec::crra(0.5), 1.0);
  const UizReport r = uiz_diagnostic(m, s, d.price_system.z0, 1.0);
  EXPECT_TRUE(r.finite);
  EXPECT_TRUE(std::isfinite(r.sup));
  EXPECT_GE(r.argmax, 0);
}

TEST(Dynamic, ZeroPerturbationReproducesBase) {
  const Market m = binomial(3, 0.1);
  PerturbationSchedule s = schedule_for(m, UtilitySpec::log_utility(), 0.0, 50);
  s.a = s.b = s.kappa = 0.0;
  s.theta.resize(0);
  const DynamicReport r = run_dynamic(m, s);
  EXPECT_EQ(r.distinct_solves, 1);
  for (const auto& row : r.rows) EXPECT_LE(row.terminal_deviation, 1e-15);
  EXPECT_LE(r.value_deviation, 1e-14);
  for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.residual << " > " << c.tolerance;
}

TEST(Dynamic, CachesIdenticalInstancesAndConverges) {
  const Market m = binomial(3, 0.1);
  const PerturbationSchedule s = schedule_for(m, UtilitySpec::crra(3.0), 0.3, 2000);
  DynamicOptions one, three;
  three.threads = 3;
  const DynamicReport a = run_dynamic(m, s, one), b = run_dynamic(m, s, three);
  EXPECT_TRUE(a.pass());
  EXPECT_LT(a.distinct_solves, 200);
  EXPECT_TRUE(a.deflator.deflator);
  EXPECT_EQ((a.limit.y0 - b.limit.y0).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(a.value_deviation, b.value_deviation);
}
