#pragma once

#include <optional>

#include "txlab/tree.hpp"

namespace txlab {

/// Frictional market: strictly positive price on a tree and proportional
/// transaction costs. Buying executes at the ask S, selling at the bid (1−λ)S.
///
/// λ = 0 is accepted and yields the frictionless market used for shadow
/// price verification.
class Market {
 public:
  Market(ScenarioTree tree, Process price, double lambda);

  const ScenarioTree& tree() const noexcept { return tree_; }
  const Process& price() const noexcept { return price_; }
  double lambda() const noexcept { return lambda_; }
  double ask(int n) const { return price_[n]; }
  double bid(int n) const { return (1.0 - lambda_) * price_[n]; }
  bool frictionless() const noexcept { return lambda_ == 0.0; }

  /// Same price and costs on a re-weighted tree.
  Market with_tree(ScenarioTree tree) const { return Market(std::move(tree), price_, lambda_); }

 private:
  ScenarioTree tree_;
  Process price_;
  double lambda_;
};

/// Buy and sell volumes executed at each node at that node's prices.
struct TradingStrategy {
  Process buy;
  Process sell;

  static TradingStrategy zero(const ScenarioTree& tree);
};

/// Post-trade bond and stock holdings at each node.
struct HoldingsProcess {
  Process bond;
  Process stock;
};

/// Runs the self-financing recursion (equality form) from the endowment (x, 0).
HoldingsProcess holdings(const Market& market, const TradingStrategy& strategy, double x);

/// φ⁰ + (φ¹)⁺(1−λ)S − (φ¹)⁻S node-wise.
Process liquidation_value(const Market& market, const HoldingsProcess& h);

struct AdmissibilityReport {
  bool admissible = true;
  int worst_node = 0;
  double worst_value = 0.0;       ///< smallest liquidation value
  double max_terminal_stock = 0.0;  ///< largest |φ¹| at a leaf
};

AdmissibilityReport is_admissible(const Market& market, const TradingStrategy& strategy, double x,
                                  double tol);

struct SelfFinancingReport {
  bool ok = true;
  double max_violation = 0.0;
  int worst_node = 0;
};

/// Inequality form of the self-financing condition for externally supplied
/// holdings. With `x` given, the root is checked against the endowment (x, 0);
/// otherwise only parent-to-child increments are checked.
SelfFinancingReport check_self_financing(const Market& market, const HoldingsProcess& h, double tol,
                                         std::optional<double> x = std::nullopt);

}  // namespace txlab
