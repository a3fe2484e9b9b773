#pragma once

#include <span>
#include <vector>

#include "txlab/market.hpp"
#include "txlab/utility.hpp"

namespace txlab {

struct SolverOptions {
  double tol = 1e-8;  ///< relative KKT residual
  int max_iter = 2000;
  double barrier_decay = 0.2;
  double start_eps = 1e-6;  ///< initial symmetric trade, as a fraction of x/S
  double barrier_final = 1e-14;
};

struct SolverDiagnostics {
  int iterations = 0;
  double final_barrier = 0.0;
  double kkt_residual = 0.0;
};

struct PrimalSolution {
  TradingStrategy strategy;  ///< netted, with the forced leaf liquidation
  HoldingsProcess holdings;
  Eigen::VectorXd terminal_wealth;  ///< ĝ, ordered as tree.leaves()
  double value = 0.0;               ///< E[U(ĝ)]
  double marginal = 0.0;            ///< u'(x) from the KKT multipliers
  SolverDiagnostics diagnostics;
};

/// Maximises E[U(V_T^liq)] over admissible strategies by a log-barrier method.
PrimalSolution solve_primal(const Market& market, const UtilitySpec& u, double x,
                            const SolverOptions& opts = {});

/// Grid search over net trades with successive zoom. Refuses trees with more
/// than three trading nodes (PreconditionError).
double brute_force_primal(const Market& market, const UtilitySpec& u, double x, int grid_size = 21);

struct CurvePoint {
  double arg = 0.0;
  double value = 0.0;
  double marginal = 0.0;     ///< from KKT multipliers
  double fd_marginal = 0.0;  ///< central finite difference
};

std::vector<CurvePoint> u_curve(const Market& market, const UtilitySpec& u, std::span<const double> xs,
                                const SolverOptions& opts = {});

}  // namespace txlab
