#include "txlab/duality_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "txlab/error.hpp"

namespace txlab {

namespace {

// Largest positive drift relative to the process scale; the supermartingale
// direction is x(n) >= E[x | n], so violations are negative drifts.

double max_fall(const ScenarioTree& tree, const Process& x) {
  const Process d = one_step_drift(tree, x);
  const double scale = std::max(x.lpNorm<Eigen::Infinity>(), 1e-300);
  return std::max(0.0, d.maxCoeff()) / scale;
}

std::vector<char> below_region(const ScenarioTree& tree, const StoppingRegion& sigma) {
  std::vector<char> below(tree.size(), 0);
  for (int v : tree.order()) below[v] = sigma.contains(v) || (v != 0 && below[tree.parent(v)]);
  return below;
}

Process deflated_value(const Deflator& d, const HoldingsProcess& h) {
  return d.y0.cwiseProduct(h.bond) + d.y1.cwiseProduct(h.stock);
}

ExplicitStrategy run_explicit(const Market& market, const Deflator& d, const StoppingRegion& sigma,
                              const Process& ratio, double eps, bool is_long) {
  const auto& tree = market.tree();
  const double lam = market.lambda();
  ExplicitStrategy out;
  out.x = is_long ? 1.0 - (1.0 - lam) * (1.0 - eps) : lam + eps;
  out.strategy = TradingStrategy::zero(tree);
  auto outside_open = [&](int n) { return ratio[n] <= 1.0 - eps || ratio[n] >= 1.0 + eps; };
  auto outside_closed = [&](int n) { return ratio[n] < 1.0 - eps || ratio[n] > 1.0 + eps; };
  for (int s : sigma.nodes()) {
    const double shares = 1.0 / market.price()[s];
    (is_long ? out.strategy.buy : out.strategy.sell)[s] += shares;
    // Liquidate at the first node outside the open band, at a leaf, or just
    // before any successor would leave the closed band.
    std::vector<int> stack{s};
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      bool stop = tree.is_leaf(n) || (n != s && outside_open(n));
      for (int c : tree.children(n)) stop = stop || outside_closed(c);
      if (stop) {
        (is_long ? out.strategy.sell : out.strategy.buy)[n] += shares;
      } else {
        for (int c : tree.children(n)) stack.push_back(c);
      }
    }
  }
  out.admissibility = is_admissible(market, out.strategy, out.x, 1e-12 * out.x);
  const HoldingsProcess h = holdings(market, out.strategy, out.x);
  const Process value = deflated_value(d, h);
  const double scale = std::max(value.cwiseAbs().maxCoeff(), out.x * d.y0[0]);
  out.deflated = classify_martingale(tree, value, 1e-10 * scale);
  const double root_rise = std::max(0.0, value[0] - out.x * d.y0[0]) / scale;
  out.supermartingale = (out.deflated.kind == MartingaleKind::martingale ||
                         out.deflated.kind == MartingaleKind::supermartingale) &&
                        root_rise <= 1e-10;
  return out;
}

}  // namespace

double value_scale(double u, double x, double marginal) { return std::max(std::abs(u), std::abs(x * marginal)); }

DualityReport verify_duality(const Market& market, const UtilitySpec& u, double x, const SolverOptions& opts,
                             const DualityTolerances& tol) {
  DualityReport r;
  r.x = x;
  r.primal = solve_primal(market, u, x, opts);
  r.u = r.primal.value;
  r.y_star = r.primal.marginal;
  r.conjugate = conjugate_cross_check(market, u, x, r.primal, opts, tol.grid_levels);
  r.dual = solve_dual(market, u, r.y_star, opts);
  r.v = r.dual.value;
  const double xy = x * r.y_star;
  r.gap = std::abs(r.conjugate.gap) / value_scale(r.u, x, r.y_star);

  const auto& tree = market.tree();
  const auto leaves = tree.leaves();
  const int nl = static_cast<int>(leaves.size());
  r.first_order.resize(nl);
  r.inverse_first_order.resize(nl);
  double eg = 0.0;
  for (int j = 0; j < nl; ++j) {
    const double g = r.primal.terminal_wealth[j], h = r.dual.terminal_density[j];
    r.first_order[j] = std::abs(h - marginal_utility(u, g)) / h;
    r.inverse_first_order[j] = std::abs(g - inverse_marginal(u, h)) / g;
    eg += tree.prob(leaves[j]) * g * h;
  }
  r.complementarity = std::abs(eg - xy) / xy;

  const Deflator d = r.dual.deflator();
  const Process value = deflated_value(d, r.primal.holdings);
  const Process drift = one_step_drift(tree, value);
  r.product_martingale =
      std::max(drift.cwiseAbs().maxCoeff(), std::abs(value[0] - x * d.y0[0])) / xy;

  r.checks = {
      make_check("duality_gap", r.gap, tol.gap),
      make_check("first_order", r.first_order.maxCoeff(), tol.first_order),
      make_check("inverse_first_order", r.inverse_first_order.maxCoeff(), tol.first_order),
      make_check("complementarity", r.complementarity, tol.complementarity),
      make_check("product_martingale", r.product_martingale, tol.product_martingale),
  };
  return r;
}

double grid_epsilon(const Market& market, const StoppingRegion& sigma) {
  const auto& tree = market.tree();
  const auto& S = market.price();
  const auto below = below_region(tree, sigma);
  double eps = 0.0;
  for (int v : tree.interior()) {
    if (!below[v]) continue;
    for (int c : tree.children(v)) eps = std::max(eps, std::abs(S[c] / S[v] - 1.0));
  }
  return std::clamp(eps, 1e-12, 1.0 - market.lambda());
}

SandwichReport deflator_sandwich(const Market& market, const Deflator& d, const StoppingRegion& sigma,
                                 std::optional<double> eps_in, double slack_tol) {
  const auto& tree = market.tree();
  const auto& S = market.price();
  const double lam = market.lambda();
  SandwichReport r;
  r.eps = eps_in ? *eps_in : grid_epsilon(market, sigma);
  if (!(r.eps > 0.0)) throw PreconditionError("eps must be positive");
  if (r.eps + lam > 1.0 + 1e-15) throw PreconditionError("eps + lambda must not exceed 1");

  const double scale0 = std::max(d.y0.lpNorm<Eigen::Infinity>(), 1e-300);
  const double scale1 = std::max(d.y1.lpNorm<Eigen::Infinity>(), 1e-300);
  const DoobDecomposition dec0 = doob_decompose(tree, d.y0, 1e-10 * scale0);
  const DoobDecomposition dec1 = doob_decompose(tree, d.y1, 1e-10 * scale1);
  const Process& a0 = dec0.compensator;
  const Process& a1 = dec1.compensator;

  Process ratio = Process::Ones(tree.size());
  const auto below = below_region(tree, sigma);
  for (int v = 0; v < tree.size(); ++v) {
    if (below[v]) ratio[v] = S[v] / S[sigma.stopped_at(tree, v)];
  }
  const StoppingRegion tau = first_crossing(tree, ratio, 1.0 - r.eps, 1.0 + r.eps, sigma);

  r.min_lower_slack = r.min_upper_slack = std::numeric_limits<double>::infinity();
  for (int s : sigma.nodes()) {
    const double ref = S[s] * (d.y0[s] > 0.0 ? d.y0[s] : scale0);
    for (int k = tree.time(s); k <= tree.horizon(); ++k) {
      double da0 = -a0[s], da1 = -a1[s];
      std::vector<int> stack{s};
      while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        if (tau.contains(n) || tree.time(n) == k) {
          const double w = tree.prob(n) / tree.prob(s);
          da0 += w * a0[n];
          da1 += w * a1[n];
        } else {
          for (int c : tree.children(n)) stack.push_back(c);
        }
      }
      r.min_lower_slack = std::min(r.min_lower_slack, (da1 - (1.0 - r.eps) * (1.0 - lam) * S[s] * da0) / ref);
      r.min_upper_slack = std::min(r.min_upper_slack, ((1.0 + r.eps) * S[s] * da0 - da1) / ref);
      ++r.regions_checked;
    }
  }

  r.long_strategy = run_explicit(market, d, sigma, ratio, r.eps, true);
  r.short_strategy = run_explicit(market, d, sigma, ratio, r.eps, false);
  auto adm_residual = [](const ExplicitStrategy& e) {
    return std::max({0.0, -e.admissibility.worst_value / e.x, e.admissibility.max_terminal_stock});
  };
  r.checks = {
      make_check("sandwich_lower", std::max(0.0, -r.min_lower_slack), slack_tol),
      make_check("sandwich_upper", std::max(0.0, -r.min_upper_slack), slack_tol),
      make_check("long_strategy_admissible", adm_residual(r.long_strategy), 1e-12),
      make_check("short_strategy_admissible", adm_residual(r.short_strategy), 1e-12),
      make_check("long_strategy_supermartingale", r.long_strategy.supermartingale ? 0.0 : 1.0, 0.0),
      make_check("short_strategy_supermartingale", r.short_strategy.supermartingale ? 0.0 : 1.0, 0.0),
  };
  return r;
}

LocalMartReport local_mart_equivalence(const Market& market, const Deflator& d, double tol) {
  if (tol < 0.0) throw PreconditionError("tolerance must be non-negative");
  const auto& tree = market.tree();
  LocalMartReport r;
  r.deflator = is_deflator(market, d, std::max(tol, 1e-8));
  r.applicable = r.deflator.deflator;
  r.compensator0 = max_fall(tree, d.y0);
  r.compensator1 = max_fall(tree, d.y1);
  r.zero0 = r.compensator0 <= tol;
  r.zero1 = r.compensator1 <= tol;
  r.consistent = r.zero0 == r.zero1;
  return r;
}

PositivityReport positivity_martingale_check(const Market& market, const UtilitySpec& u, double x, double threshold,
                                             const SolverOptions& opts, double tol) {
  if (!(threshold > 0.0)) throw PreconditionError("threshold must be positive");
  PositivityReport r;
  const PrimalSolution p = solve_primal(market, u, x, opts);
  r.min_liquidation = liquidation_value(market, p.holdings).minCoeff() / x;
  r.strictly_positive = r.min_liquidation >= threshold;
  const DualSolution d = solve_dual(market, u, p.marginal, opts);
  r.compensator0 = max_fall(market.tree(), d.price_system.z0);
  r.compensator1 = max_fall(market.tree(), d.price_system.z1);
  r.consistent = !r.strictly_positive || (r.compensator0 <= tol && r.compensator1 <= tol);
  return r;
}

ShadowPrice extract_shadow(const Market& market, const DualSolution& dual, double tol, std::string source) {
  const auto& S = market.price();
  ShadowPrice sp;
  sp.ratio = dual.price_system.ratio();
  sp.y = dual.y;
  sp.source = std::move(source);
  for (int v = 0; v < S.size(); ++v) {
    const double lo = market.bid(v), hi = market.ask(v);
    const double viol = std::max(lo - sp.ratio[v], sp.ratio[v] - hi) / hi;
    if (!(viol <= tol)) {
      throw ExtractionError("candidate shadow price leaves the spread at node " + std::to_string(v));
    }
    sp.ratio[v] = std::clamp(sp.ratio[v], lo, hi);
  }
  return sp;
}

ShadowReport verify_shadow(const Market& market, const UtilitySpec& u, double x, const ShadowPrice& sp,
                           const PrimalSolution& frictional, double value_tol, double wealth_tol,
                           const SolverOptions& opts) {
  ShadowReport r;
  const auto& S = market.price();
  for (int v = 0; v < S.size(); ++v) {
    r.spread_violation = std::max({r.spread_violation, (market.bid(v) - sp.ratio[v]) / S[v], (sp.ratio[v] - S[v]) / S[v]});
  }
  const Market shadow(market.tree(), sp.ratio, 0.0);
  const PrimalSolution fl = solve_primal(shadow, u, x, opts);
  r.value_frictional = frictional.value;
  r.value_shadow = fl.value;
  r.value_deviation = std::abs(fl.value - frictional.value) / value_scale(frictional.value, x, frictional.marginal);
  r.wealth_deviation =
      ((fl.terminal_wealth - frictional.terminal_wealth).array() / frictional.terminal_wealth.array()).abs().maxCoeff();
  r.checks = {
      make_check("shadow_in_spread", std::max(0.0, r.spread_violation), 1e-12),
      make_check("shadow_value", r.value_deviation, value_tol),
      make_check("shadow_wealth", r.wealth_deviation, wealth_tol),
  };
  return r;
}

ShadowReport verify_shadow(const Market& market, const UtilitySpec& u, double x, const ShadowPrice& sp,
                           double value_tol, double wealth_tol, const SolverOptions& opts) {
  return verify_shadow(market, u, x, sp, solve_primal(market, u, x, opts), value_tol, wealth_tol, opts);
}

}  // namespace txlab
