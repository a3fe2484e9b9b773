#pragma once

#include <span>
#include <vector>

#include "txlab/market.hpp"
#include "txlab/primal.hpp"
#include "txlab/utility.hpp"

namespace txlab {

/// Consistent price system (Z⁰, Z¹): P-martingales, Z⁰(root) = 1, ratio in the spread.
struct PriceSystem {
  Process z0;
  Process z1;

  Process ratio() const { return z1.cwiseQuotient(z0); }
};

/// Supermartingale deflator candidate (Y⁰, Y¹).
struct Deflator {
  Process y0;
  Process y1;

  static Deflator from(const PriceSystem& z, double y) { return {y * z.z0, y * z.z1}; }
};

struct DualSolution {
  PriceSystem price_system;         ///< Ẑ
  Eigen::VectorXd terminal_density;  ///< ĥ = y Ẑ⁰ at tree.leaves()
  double y = 0.0;
  double value = 0.0;     ///< E[V(ĥ)]
  double marginal = 0.0;  ///< v'(y) = E[V'(ĥ) Ẑ⁰]
  SolverDiagnostics diagnostics;

  Deflator deflator() const { return Deflator::from(price_system, y); }
};

/// Minimises E[V(y Z⁰_T)] over consistent price systems with a barrier method.
/// Throws InfeasibilityError when no consistent price system exists.
DualSolution solve_dual(const Market& market, const UtilitySpec& u, double y, const SolverOptions& opts = {});

struct CpsReport {
  bool feasible = true;
  double martingale_residual = 0.0;  ///< relative one-step drift of Z⁰ and Z¹
  double spread_violation = 0.0;     ///< relative distance of Z¹/Z⁰ outside the spread
  double root_violation = 0.0;       ///< |Z⁰(root) − 1|
  bool positive = true;
};

CpsReport is_cps(const Market& market, const PriceSystem& z, double tol);

struct DeflatorReport {
  bool deflator = true;
  double supermartingale_violation = 0.0;  ///< relative positive drift of Y⁰ or Y¹
  double spread_violation = 0.0;
  double portfolio_violation = 0.0;  ///< worst one-step deflated cone generator
  bool nonnegative = true;
};

/// Checks supermartingality, the spread condition and the one-step deflated
/// portfolio inequality against the generators of the admissible cone.
DeflatorReport is_deflator(const Market& market, const Deflator& d, double tol);

std::vector<CurvePoint> v_curve(const Market& market, const UtilitySpec& u, std::span<const double> ys,
                                const SolverOptions& opts = {});

struct ConjugateCheck {
  double u = 0.0;
  double y_star = 0.0;   ///< u'(x)
  double y_best = 0.0;   ///< minimiser found on the refined grid
  double min_dual = 0.0; ///< v(y_best) + x y_best
  double gap = 0.0;      ///< min_dual − u (non-negative by weak duality)
};

/// |u(x) − min_y (v(y) + xy)| with the minimum taken over a log grid refined
/// around y = u'(x). Weak duality makes the result an upper bound on the gap.
ConjugateCheck conjugate_cross_check(const Market& market, const UtilitySpec& u, double x,
                                     const SolverOptions& opts = {}, int levels = 3);

/// Same, reusing an already computed primal optimum.
ConjugateCheck conjugate_cross_check(const Market& market, const UtilitySpec& u, double x,
                                     const PrimalSolution& primal, const SolverOptions& opts = {},
                                     int levels = 3);

}  // namespace txlab
