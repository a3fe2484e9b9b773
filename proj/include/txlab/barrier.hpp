#pragma once

#include <functional>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace txlab {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Convex program
///
///   minimise  Σ_k f_k(a_k),   a = G z + g0 > 0
///   subject to  A z + c0 > 0,  E z = e
///
/// with separable, smooth, convex f. The argument vector a must stay strictly
/// positive (both solvers feed utilities or conjugates defined on (0, ∞)).
struct BarrierProblem {
  SparseMatrix objective_map;  ///< G
  Eigen::VectorXd objective_offset;  ///< g0
  /// Fills value, first and second derivative of each f_k at a.
  std::function<void(const Eigen::VectorXd& a, Eigen::VectorXd& f, Eigen::VectorXd& df,
                     Eigen::VectorXd& d2f)>
      objective;
  SparseMatrix inequality;  ///< A (may have zero rows)
  Eigen::VectorXd inequality_offset;  ///< c0
  SparseMatrix equality;  ///< E (may have zero rows); needs a positive definite barrier Hessian
  Eigen::VectorXd equality_rhs;  ///< e
};

struct BarrierOptions {
  double tol = 1e-8;  ///< relative KKT residual required at exit
  int max_iter = 2000;  ///< total Newton iterations
  double barrier_decay = 0.2;
  double barrier_start = 1.0;
  double barrier_final = 1e-14;
};

struct BarrierResult {
  Eigen::VectorXd z;
  Eigen::VectorXd args;  ///< G z + g0
  Eigen::VectorXd slack;  ///< A z + c0
  Eigen::VectorXd inequality_multiplier;  ///< μ / slack
  Eigen::VectorXd equality_multiplier;
  double objective = 0.0;
  double final_barrier = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Barrier continuation with damped Newton steps from a strictly feasible z0.
/// Throws SolverError when the iteration budget is exhausted or the relative
/// KKT residual stays above `tol`.
BarrierResult minimize_with_barrier(const BarrierProblem& problem, Eigen::VectorXd z0,
                                    const BarrierOptions& opts);

}  // namespace txlab
