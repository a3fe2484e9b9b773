#include "txlab/market.hpp"

#include <algorithm>
#include <cmath>

#include "txlab/error.hpp"

namespace txlab {

Market::Market(ScenarioTree tree, Process price, double lambda)
    : tree_(std::move(tree)), price_(std::move(price)), lambda_(lambda) {
  if (price_.size() != tree_.size()) throw StructuralError("price vector size does not match tree");
  if (!(lambda_ >= 0.0 && lambda_ < 1.0)) throw DomainError("transaction cost must lie in [0,1)");
  for (int i = 0; i < price_.size(); ++i) {
    if (!(price_[i] > 0.0) || !std::isfinite(price_[i])) {
      throw DomainError("price must be strictly positive and finite at node " + std::to_string(i));
    }
  }
}

TradingStrategy TradingStrategy::zero(const ScenarioTree& tree) {
  return {Process::Zero(tree.size()), Process::Zero(tree.size())};
}

HoldingsProcess holdings(const Market& market, const TradingStrategy& strategy, double x) {
  const auto& tree = market.tree();
  if (!(x > 0.0)) throw DomainError("initial endowment must be positive");
  if (strategy.buy.size() != tree.size() || strategy.sell.size() != tree.size()) {
    throw StructuralError("strategy size does not match tree");
  }
  HoldingsProcess h{Process(tree.size()), Process(tree.size())};
  for (int v : tree.order()) {
    const double bond0 = v == 0 ? x : h.bond[tree.parent(v)];
    const double stock0 = v == 0 ? 0.0 : h.stock[tree.parent(v)];
    h.stock[v] = stock0 + strategy.buy[v] - strategy.sell[v];
    h.bond[v] = bond0 - market.ask(v) * strategy.buy[v] + market.bid(v) * strategy.sell[v];
  }
  return h;
}

Process liquidation_value(const Market& market, const HoldingsProcess& h) {
  const auto& s = market.price().array();
  const auto pos = h.stock.array().max(0.0);
  const auto neg = (-h.stock.array()).max(0.0);
  return h.bond.array() + pos * (1.0 - market.lambda()) * s - neg * s;
}

AdmissibilityReport is_admissible(const Market& market, const TradingStrategy& strategy, double x,
                                  double tol) {
  if (tol < 0.0) throw PreconditionError("tolerance must be non-negative");
  const auto h = holdings(market, strategy, x);
  const Process liq = liquidation_value(market, h);
  AdmissibilityReport r;
  Eigen::Index worst = 0;
  r.worst_value = liq.minCoeff(&worst);
  r.worst_node = static_cast<int>(worst);
  for (int l : market.tree().leaves()) {
    r.max_terminal_stock = std::max(r.max_terminal_stock, std::abs(h.stock[l]));
  }
  const double stock_tol = std::max(tol, 1e-12 * x / market.price().minCoeff());
  r.admissible = r.worst_value >= -tol && r.max_terminal_stock <= stock_tol;
  return r;
}

SelfFinancingReport check_self_financing(const Market& market, const HoldingsProcess& h, double tol,
                                         std::optional<double> x) {
  if (tol < 0.0) throw PreconditionError("tolerance must be non-negative");
  const auto& tree = market.tree();
  SelfFinancingReport r;
  auto check = [&](int v, double bond0, double stock0) {
    const double d_stock = h.stock[v] - stock0;
    const double cash = -market.ask(v) * std::max(d_stock, 0.0) + market.bid(v) * std::max(-d_stock, 0.0);
    const double excess = (h.bond[v] - bond0) - cash;
    if (excess > r.max_violation) {
      r.max_violation = excess;
      r.worst_node = v;
    }
  };
  for (int v : tree.order()) {
    if (v == 0) {
      if (x) check(0, *x, 0.0);
    } else {
      check(v, h.bond[tree.parent(v)], h.stock[tree.parent(v)]);
    }
  }
  r.ok = r.max_violation <= tol;
  return r;
}

}  // namespace txlab
