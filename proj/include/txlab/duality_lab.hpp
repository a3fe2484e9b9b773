#pragma once

#include <optional>
#include <string>
#include <vector>

#include "txlab/check.hpp"
#include "txlab/dual.hpp"
#include "txlab/primal.hpp"

namespace txlab {

struct DualityTolerances {
  double gap = 1e-5;                 ///< relative duality gap
  double first_order = 1e-5;         ///< max_leaf |ĥ − U'(ĝ)| / ĥ
  double complementarity = 1e-6;     ///< |E[ĝĥ] − xy| / (xy)
  double product_martingale = 1e-6;  ///< drift of φ̂⁰Ŷ⁰ + φ̂¹Ŷ¹ relative to xy
  int grid_levels = 3;               ///< refinement levels of the conjugate cross-check
};

/// Relative scale for value comparisons: max(|u|, x u'(x)). The additive
/// normalisation of U makes |u| alone meaningless near zero.
double value_scale(double u, double x, double marginal);

struct DualityReport {
  double x = 0.0;
  double y_star = 0.0;
  double u = 0.0;
  double v = 0.0;
  ConjugateCheck conjugate;
  double gap = 0.0;                  ///< relative, see value_scale
  Eigen::VectorXd first_order;       ///< |ĥ − U'(ĝ)| / ĥ per leaf
  Eigen::VectorXd inverse_first_order;  ///< |ĝ − I(ĥ)| / ĝ per leaf
  double complementarity = 0.0;
  double product_martingale = 0.0;
  PrimalSolution primal;
  DualSolution dual;
  std::vector<Check> checks;

  bool pass() const { return all_pass(checks); }
};

DualityReport verify_duality(const Market& market, const UtilitySpec& u, double x, const SolverOptions& opts = {},
                             const DualityTolerances& tol = {});

/// Largest one-step relative price move |S_c/S_n − 1| over edges below the
/// region, capped at 1 − λ.
double grid_epsilon(const Market& market, const StoppingRegion& sigma);

struct ExplicitStrategy {
  double x = 0.0;  ///< initial bond endowment
  TradingStrategy strategy;
  AdmissibilityReport admissibility;
  MartingaleClass deflated;  ///< classification of Y⁰φ⁰ + Y¹φ¹
  bool supermartingale = false;
};

struct SandwichReport {
  double eps = 0.0;
  double min_lower_slack = 0.0;  ///< min of A¹ incr − (1−ε)(1−λ)S_σ A⁰ incr, relative
  double min_upper_slack = 0.0;  ///< min of (1+ε)S_σ A⁰ incr − A¹ incr, relative
  int regions_checked = 0;
  ExplicitStrategy long_strategy;   ///< (1−(1−λ)(1−ε), 0) → (−(1−λ)(1−ε), 1/S_σ)
  ExplicitStrategy short_strategy;  ///< (λ+ε, 0) → (1+ε, −1/S_σ)
  std::vector<Check> checks;

  bool pass() const { return all_pass(checks); }
};

/// Checks the compensator sandwich between σ and every truncation of τ_ε and
/// runs the two explicit test strategies. `eps` defaults to grid_epsilon.
SandwichReport deflator_sandwich(const Market& market, const Deflator& d, const StoppingRegion& sigma,
                                 std::optional<double> eps = std::nullopt, double slack_tol = 1e-8);

struct LocalMartReport {
  bool applicable = true;  ///< false when the input is not a deflator
  DeflatorReport deflator;
  double compensator0 = 0.0;  ///< largest relative compensator increment of Y⁰
  double compensator1 = 0.0;
  bool zero0 = true;
  bool zero1 = true;
  bool consistent = true;  ///< zero0 == zero1
};

LocalMartReport local_mart_equivalence(const Market& market, const Deflator& d, double tol);

struct PositivityReport {
  double min_liquidation = 0.0;  ///< min node-wise liquidation value of φ̂, relative to x
  bool strictly_positive = false;  ///< min_liquidation >= threshold
  double compensator0 = 0.0;
  double compensator1 = 0.0;
  bool consistent = true;  ///< compensators vanish whenever strictly_positive
};

PositivityReport positivity_martingale_check(const Market& market, const UtilitySpec& u, double x, double threshold,
                                             const SolverOptions& opts = {}, double tol = 1e-8);

struct ShadowPrice {
  Process ratio;  ///< S̃ = Ẑ¹/Ẑ⁰
  double y = 0.0;  ///< dual argument of the source solution
  std::string source;
};

/// Throws ExtractionError if the ratio leaves the spread by more than tol (relative).
ShadowPrice extract_shadow(const Market& market, const DualSolution& dual, double tol = 1e-9,
                           std::string source = "dual");

struct ShadowReport {
  double value_frictional = 0.0;
  double value_shadow = 0.0;
  double value_deviation = 0.0;   ///< relative, see value_scale
  double wealth_deviation = 0.0;  ///< max leaf-wise relative deviation
  double spread_violation = 0.0;
  std::vector<Check> checks;

  bool pass() const { return all_pass(checks); }
};

ShadowReport verify_shadow(const Market& market, const UtilitySpec& u, double x, const ShadowPrice& sp,
                           double value_tol = 1e-5, double wealth_tol = 1e-4, const SolverOptions& opts = {});

/// Same, with the frictional optimum supplied by the caller.
ShadowReport verify_shadow(const Market& market, const UtilitySpec& u, double x, const ShadowPrice& sp,
                           const PrimalSolution& frictional, double value_tol = 1e-5, double wealth_tol = 1e-4,
                           const SolverOptions& opts = {});

}  // namespace txlab
