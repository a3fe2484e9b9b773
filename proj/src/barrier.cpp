#include "txlab/barrier.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include <Eigen/SparseCholesky>

#include "txlab/error.hpp"

namespace txlab {

namespace {

using Eigen::VectorXd;

constexpr double kInnerTol = 1e-14;  // half squared Newton decrement
constexpr int kMaxInner = 100;
constexpr double kArmijo = 1e-4;
constexpr double kBoundaryFraction = 0.99;
constexpr double kRegularisation = 1e-13;
constexpr double kKktShift = 1e-14;

struct Point {
  VectorXd args, slack, f, df, d2f;
  double merit = 0.0;  ///< objective − μ Σ log slack
  double objective = 0.0;
  bool feasible = false;
};

class Evaluator {
 public:
  Evaluator(const BarrierProblem& p) : p_(p) {}

  Point at(const VectorXd& z, double mu) const {
    Point pt;
    pt.args = p_.objective_map * z + p_.objective_offset;
    pt.slack = p_.inequality.rows() ? VectorXd(p_.inequality * z + p_.inequality_offset) : VectorXd();
    if (pt.args.size() && !(pt.args.minCoeff() > 0.0)) return pt;
    if (pt.slack.size() && !(pt.slack.minCoeff() > 0.0)) return pt;
    p_.objective(pt.args, pt.f, pt.df, pt.d2f);
    pt.objective = pt.f.sum();
    if (!std::isfinite(pt.objective)) return pt;
    pt.merit = pt.objective - (pt.slack.size() ? mu * pt.slack.array().log().sum() : 0.0);
    pt.feasible = std::isfinite(pt.merit);
    return pt;
  }

 private:
  const BarrierProblem& p_;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) t = std::min(t, -v[i] / dv[i]);
  }
  return t;
}

// Newton direction of the barrier subproblem with optional equality block,
// solved through a quasi-definite KKT factorisation plus iterative refinement.
class NewtonSystem {
 public:
  explicit NewtonSystem(const BarrierProblem& p) : p_(p) {}

  void direction(const Point& pt, const VectorXd& z, double mu, VectorXd& dz, VectorXd& nu,
                 VectorXd& grad, double& decrement2) {
    const auto& G = p_.objective_map;
    const auto& A = p_.inequality;
    const Eigen::Index n = z.size();
    grad = G.transpose() * pt.df;
    SparseMatrix H = SparseMatrix(G.transpose() * pt.d2f.asDiagonal()) * G;
    if (A.rows()) {
      const VectorXd inv = pt.slack.cwiseInverse();
      grad -= mu * (A.transpose() * inv);
      const VectorXd w = mu * inv.cwiseAbs2();
      H += SparseMatrix(A.transpose() * w.asDiagonal()) * A;
    }
    double diag_max = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) diag_max = std::max(diag_max, std::abs(H.coeff(i, i)));
    SparseMatrix reg(n, n);
    reg.setIdentity();
    H += (kRegularisation * diag_max) * reg;

    const Eigen::Index m = p_.equality.rows();
    if (m == 0) {
      ldlt_.compute(H);
      if (ldlt_.info() != Eigen::Success) throw NumericError("Newton matrix factorisation failed");
      dz = ldlt_.solve(-grad);
      nu.resize(0);
    } else {
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(H.nonZeros() + 2 * p_.equality.nonZeros() + m);
      for (int k = 0; k < H.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(H, k); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
      for (int k = 0; k < p_.equality.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(p_.equality, k); it; ++it) {
          trip.emplace_back(n + it.row(), it.col(), it.value());
          trip.emplace_back(it.col(), n + it.row(), it.value());
        }
      SparseMatrix K0(n + m, n + m);
      K0.setFromTriplets(trip.begin(), trip.end());
      const double shift = kKktShift;
      for (Eigen::Index i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -shift);
      SparseMatrix K(n + m, n + m);
      K.setFromTriplets(trip.begin(), trip.end());
      kkt_.compute(K);
      if (kkt_.info() != Eigen::Success) throw NumericError("KKT factorisation failed");
      VectorXd rhs(n + m);
      rhs.head(n) = -grad;
      rhs.tail(m) = p_.equality_rhs - p_.equality * z;
      VectorXd sol = kkt_.solve(rhs);
      for (int r = 0; r < 3; ++r) sol += kkt_.solve(VectorXd(rhs - K0 * sol));
      dz = sol.head(n);
      nu = sol.tail(m);
    }
    decrement2 = dz.dot(H * dz);
  }

 private:
  const BarrierProblem& p_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  // Variables before multipliers: needs a positive definite Hessian block.
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> kkt_;
};

// Relative Lagrangian stationarity with the Newton-updated multipliers
// μ/c (1 − A dz / c) and the equality multipliers of the same step.
double stationarity(const BarrierProblem& p, const Point& pt, const VectorXd& dz, VectorXd nu,
                    double mu, VectorXd& lambda) {
  VectorXd stat = p.objective_map.transpose() * pt.df;
  double scale = std::max(1.0, stat.lpNorm<Eigen::Infinity>());
  if (p.inequality.rows()) {
    const VectorXd rel = (p.inequality * dz).cwiseQuotient(pt.slack);
    lambda = (mu * pt.slack.cwiseInverse()).cwiseProduct((1.0 - rel.array()).matrix());
    const VectorXd term = p.inequality.transpose() * lambda;
    scale = std::max(scale, term.lpNorm<Eigen::Infinity>());
    stat -= term;
  } else {
    lambda.resize(0);
  }
  if (p.equality.rows()) {
    // Least-squares equality multipliers for the current λ.
    const SparseMatrix EEt = p.equality * SparseMatrix(p.equality.transpose());
    Eigen::SimplicialLDLT<SparseMatrix> ls(EEt);
    VectorXd best = nu;
    if (ls.info() == Eigen::Success) {
      best = ls.solve(VectorXd(-(p.equality * stat)));
      for (int r = 0; r < 2; ++r) best += ls.solve(VectorXd(-(p.equality * stat) - EEt * best));
    }
    if ((stat + p.equality.transpose() * best).lpNorm<Eigen::Infinity>() <
        (stat + p.equality.transpose() * nu).lpNorm<Eigen::Infinity>()) {
      nu = best;
    }
    const VectorXd term = p.equality.transpose() * nu;
    scale = std::max(scale, term.lpNorm<Eigen::Infinity>());
    stat += term;
  }
  return stat.lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace

BarrierResult minimize_with_barrier(const BarrierProblem& problem, VectorXd z, const BarrierOptions& opts) {
  const Evaluator eval(problem);
  NewtonSystem newton(problem);
  const bool has_barrier = problem.inequality.rows() > 0;
  double mu = has_barrier ? opts.barrier_start : 0.0;

  Point pt = eval.at(z, mu);
  if (!pt.feasible) throw NumericError("barrier solver needs a strictly feasible start");

  BarrierResult res;
  VectorXd dz, nu, grad, lambda;
  double dec2 = 0.0;
  for (;;) {
    const bool last = !has_barrier || mu <= opts.barrier_final;
    for (int inner = 0; inner < kMaxInner; ++inner) {
      newton.direction(pt, z, mu, dz, nu, grad, dec2);
      const double eq_res = problem.equality.rows()
                                ? (problem.equality * z - problem.equality_rhs).lpNorm<Eigen::Infinity>()
                                : 0.0;
      if (eq_res <= 1e-13) {
        if (last ? stationarity(problem, pt, dz, nu, mu, lambda) <= 0.1 * opts.tol || 0.5 * dec2 <= 1e-24
                 : 0.5 * dec2 <= kInnerTol) {
          break;
        }
      }
      if (++res.iterations > opts.max_iter) {
        throw SolverError("barrier Newton iteration limit reached", pt.objective, res.iterations);
      }
      double t = 1.0;
      const VectorXd dargs = problem.objective_map * dz;
      t = std::min(t, kBoundaryFraction * max_step(pt.args, dargs));
      if (has_barrier) t = std::min(t, kBoundaryFraction * max_step(pt.slack, VectorXd(problem.inequality * dz)));
      const double slope = grad.dot(dz);
      Point trial;
      bool accepted = false;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        trial = eval.at(z + t * dz, mu);
        if (!trial.feasible) continue;
        // Near the centre merit differences drown in round-off; feasibility suffices there.
        if (dec2 < 1e-9 || trial.merit <= pt.merit + kArmijo * t * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      z += t * dz;
      pt = std::move(trial);
    }
    if (!has_barrier || mu <= opts.barrier_final) break;
    mu = std::max(mu * opts.barrier_decay, opts.barrier_final);
    pt = eval.at(z, mu);
  }

  newton.direction(pt, z, mu, dz, nu, grad, dec2);
  res.kkt_residual = std::max(stationarity(problem, pt, dz, nu, mu, lambda), mu);

  res.z = std::move(z);
  res.args = pt.args;
  res.slack = pt.slack;
  res.inequality_multiplier = lambda;
  res.equality_multiplier = nu;
  res.objective = pt.objective;
  res.final_barrier = mu;
  if (!(res.kkt_residual <= opts.tol)) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "barrier solve ended above the KKT tolerance (residual %.3e after %d iterations)",
                  res.kkt_residual, res.iterations);
    throw SolverError(msg, res.objective, res.iterations);
  }
  return res;
}

}  // namespace txlab
