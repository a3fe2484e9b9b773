#include "txlab/dual.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "txlab/barrier.hpp"
#include "txlab/cps.hpp"
#include "txlab/error.hpp"

namespace txlab {

namespace {

using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

// Re-imposes the martingale sums bottom-up and normalises the root.
void polish(const ScenarioTree& tree, Process& q, Process& w) {
  const auto order = tree.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    if (tree.is_leaf(v)) continue;
    double sq = 0.0, sw = 0.0;
    for (int c : tree.children(v)) {
      sq += q[c];
      sw += w[c];
    }
    q[v] = sq;
    w[v] = sw;
  }
  const double root = q[0];
  q /= root;
  w /= root;
}

double relative(double residual, double reference) {
  return reference > 0.0 ? residual / reference : residual;
}

}  // namespace

DualSolution solve_dual(const Market& market, const UtilitySpec& u, double y, const SolverOptions& opts) {
  if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("dual variable y must be positive");
  const auto& tree = market.tree();
  const auto& S = market.price();
  const int n = tree.size();
  const auto leaves = tree.leaves();
  const int nl = static_cast<int>(leaves.size());
  const bool frictionless = market.frictionless();
  const StrictCps start = strictly_consistent_prices(market);
  const double scale = std::abs(y * inverse_marginal(u, y));

  DualSolution sol;
  sol.y = y;
  Process q = start.q, w = start.q.cwiseProduct(start.ratio);

  if (tree.interior().size() > 0) {
    // Frictional markets use the spread slacks a = W − (1−λ)SQ and b = SQ − W as
    // variables, so Q = (a + b)/(λS) and W = (a + (1−λ)b)/λ. Frictionless ones
    // use the leaf masses of Q.
    const double lam = market.lambda();
    const int nz = frictionless ? nl : 2 * n;
    std::vector<Triplet> g, e, a;
    int eq = 0;
    if (frictionless) {
      std::vector<int> leaf_index(n, -1);
      for (int j = 0; j < nl; ++j) leaf_index[leaves[j]] = j;
      // under[v]: leaf columns below v
      std::vector<std::vector<int>> under(n);
      const auto order = tree.order();
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int v = *it;
        if (tree.is_leaf(v)) {
          under[v] = {leaf_index[v]};
        } else {
          for (int c : tree.children(v)) under[v].insert(under[v].end(), under[c].begin(), under[c].end());
        }
      }
      for (int j = 0; j < nl; ++j) g.emplace_back(j, j, y / tree.prob(leaves[j]));
      for (int j = 0; j < nl; ++j) e.emplace_back(eq, j, 1.0);
      ++eq;
      for (int v : tree.interior()) {
        for (int c : tree.children(v))
          for (int j : under[c]) e.emplace_back(eq, j, S[c] - S[v]);
        ++eq;
      }
    } else {
      auto q_terms = [&](int v, double c, std::vector<Triplet>& t, int row) {
        t.emplace_back(row, v, c / (lam * S[v]));
        t.emplace_back(row, n + v, c / (lam * S[v]));
      };
      auto w_terms = [&](int v, double c, std::vector<Triplet>& t, int row) {
        t.emplace_back(row, v, c / lam);
        t.emplace_back(row, n + v, c * (1.0 - lam) / lam);
      };
      for (int j = 0; j < nl; ++j) q_terms(leaves[j], y / tree.prob(leaves[j]), g, j);
      q_terms(0, 1.0, e, eq++);
      for (int v : tree.interior()) {
        q_terms(v, 1.0, e, eq);
        for (int c : tree.children(v)) q_terms(c, -1.0, e, eq);
        ++eq;
        w_terms(v, 1.0, e, eq);
        for (int c : tree.children(v)) w_terms(c, -1.0, e, eq);
        ++eq;
      }
    }
    int ni = 0;
    if (!frictionless) {
      for (int k = 0; k < nz; ++k) a.emplace_back(ni++, k, 1.0);
    }

    VectorXd leaf_p(nl);
    for (int j = 0; j < nl; ++j) leaf_p[j] = tree.prob(leaves[j]);

    BarrierProblem prob;
    prob.objective_map = from_triplets(nl, nz, g);
    prob.objective_offset = VectorXd::Zero(nl);
    prob.objective = [&](const VectorXd& arg, VectorXd& f, VectorXd& df, VectorXd& d2f) {
      f.resize(arg.size());
      df.resize(arg.size());
      d2f.resize(arg.size());
      for (Eigen::Index j = 0; j < arg.size(); ++j) {
        const double wgt = leaf_p[j] / scale;
        f[j] = wgt * conjugate(u, arg[j]);
        df[j] = wgt * conjugate_derivative(u, arg[j]);
        d2f[j] = wgt * conjugate_curvature(u, arg[j]);
      }
    };
    prob.inequality = from_triplets(ni, nz, a);
    prob.inequality_offset = VectorXd::Zero(ni);
    prob.equality = from_triplets(eq, nz, e);
    prob.equality_rhs = VectorXd::Zero(eq);
    prob.equality_rhs[0] = 1.0;

    VectorXd z0(nz);
    if (frictionless) {
      for (int j = 0; j < nl; ++j) z0[j] = q[leaves[j]];
    } else {
      z0.head(n) = w - (1.0 - lam) * S.cwiseProduct(q);
      z0.tail(n) = S.cwiseProduct(q) - w;
    }

    BarrierOptions bo;
    bo.tol = opts.tol;
    bo.max_iter = opts.max_iter;
    bo.barrier_decay = opts.barrier_decay;
    bo.barrier_final = opts.barrier_final;
    BarrierResult res;
    try {
      res = minimize_with_barrier(prob, z0, bo);
    } catch (const NumericError& err) {
      throw SolverError(std::string("dual solve failed: ") + err.what(), 0.0, 0);
    }
    if (frictionless) {
      for (int j = 0; j < nl; ++j) q[leaves[j]] = res.z[j];
      w = q.cwiseProduct(S);
    } else {
      const Process sa = res.z.head(n), sb = res.z.tail(n);
      q = (sa + sb).cwiseQuotient(lam * S);
      w = (sa + (1.0 - lam) * sb) / lam;
    }
    polish(tree, q, w);
    if (frictionless) w = q.cwiseProduct(S);
    sol.diagnostics = {res.iterations, res.final_barrier, res.kkt_residual};
  }

  sol.price_system.z0 = q.cwiseQuotient(tree.probs());
  sol.price_system.z1 = w.cwiseQuotient(tree.probs());
  sol.terminal_density.resize(nl);
  for (int j = 0; j < nl; ++j) {
    const int l = leaves[j];
    const double z = sol.price_system.z0[l];
    sol.terminal_density[j] = y * z;
    sol.value += tree.prob(l) * conjugate(u, y * z);
    sol.marginal += tree.prob(l) * conjugate_derivative(u, y * z) * z;
  }
  return sol;
}

CpsReport is_cps(const Market& market, const PriceSystem& z, double tol) {
  if (tol < 0.0) throw PreconditionError("tolerance must be non-negative");
  const auto& tree = market.tree();
  if (z.z0.size() != tree.size() || z.z1.size() != tree.size()) {
    throw StructuralError("price system size does not match tree");
  }
  CpsReport r;
  r.positive = z.z0.minCoeff() > 0.0 && z.z1.minCoeff() >= 0.0;
  r.root_violation = std::abs(z.z0[0] - 1.0);
  const Process d0 = one_step_drift(tree, z.z0), d1 = one_step_drift(tree, z.z1);
  const auto& S = market.price();
  for (int v = 0; v < tree.size(); ++v) {
    r.martingale_residual = std::max(
        {r.martingale_residual, relative(std::abs(d0[v]), z.z0[v]), relative(std::abs(d1[v]), z.z1[v])});
    if (z.z0[v] > 0.0) {
      const double s = z.z1[v] / z.z0[v];
      r.spread_violation = std::max({r.spread_violation, (market.bid(v) - s) / S[v], (s - S[v]) / S[v]});
    }
  }
  r.feasible = r.positive && r.root_violation <= tol && r.martingale_residual <= tol && r.spread_violation <= tol;
  return r;
}

DeflatorReport is_deflator(const Market& market, const Deflator& d, double tol) {
  if (tol < 0.0) throw PreconditionError("tolerance must be non-negative");
  const auto& tree = market.tree();
  if (d.y0.size() != tree.size() || d.y1.size() != tree.size()) {
    throw StructuralError("deflator size does not match tree");
  }
  const auto& S = market.price();
  DeflatorReport r;
  r.nonnegative = d.y0.minCoeff() >= 0.0 && d.y1.minCoeff() >= 0.0;
  const Process d0 = one_step_drift(tree, d.y0), d1 = one_step_drift(tree, d.y1);
  const double y1_scale = d.y1.lpNorm<Eigen::Infinity>();
  for (int v = 0; v < tree.size(); ++v) {
    r.supermartingale_violation = std::max({r.supermartingale_violation, relative(-d0[v], d.y0[v]),
                                            relative(-d1[v], d.y1[v])});
    if (d.y0[v] > 0.0) {
      const double s = d.y1[v] / d.y0[v];
      r.spread_violation = std::max({r.spread_violation, (market.bid(v) - s) / S[v], (s - S[v]) / S[v]});
    } else {
      r.spread_violation = std::max(r.spread_violation, relative(d.y1[v], y1_scale));
    }
  }
  for (int v : tree.interior()) {
    double lo = S[v], hi = S[v];
    for (int c : tree.children(v)) {
      lo = std::min(lo, S[c]);
      hi = std::max(hi, S[c]);
    }
    const double gens[3][2] = {{1.0, 0.0}, {-(1.0 - market.lambda()) * lo, 1.0}, {hi, -1.0}};
    for (const auto& gvec : gens) {
      const double now = d.y0[v] * gvec[0] + d.y1[v] * gvec[1];
      double next = 0.0;
      for (int c : tree.children(v)) next += tree.cond_prob(c) * (d.y0[c] * gvec[0] + d.y1[c] * gvec[1]);
      const double ref = d.y0[v] * std::abs(gvec[0]) + d.y1[v] * std::abs(gvec[1]);
      r.portfolio_violation = std::max(r.portfolio_violation, relative(next - now, ref));
    }
  }
  r.deflator = r.nonnegative && r.supermartingale_violation <= tol && r.spread_violation <= tol &&
               r.portfolio_violation <= tol;
  return r;
}

std::vector<CurvePoint> v_curve(const Market& market, const UtilitySpec& u, std::span<const double> ys,
                                const SolverOptions& opts) {
  constexpr double h = 1e-4;
  std::vector<CurvePoint> out;
  double prev = 0.0;
  for (double y : ys) {
    if (!(y > 0.0)) throw DomainError("v_curve needs positive arguments");
    if (!out.empty() && !(y > prev)) throw PreconditionError("v_curve needs sorted arguments");
    prev = y;
    const auto sol = solve_dual(market, u, y, opts);
    const double up = solve_dual(market, u, y * (1 + h), opts).value;
    const double dn = solve_dual(market, u, y * (1 - h), opts).value;
    out.push_back({y, sol.value, sol.marginal, (up - dn) / (2 * h * y)});
  }
  return out;
}

ConjugateCheck conjugate_cross_check(const Market& market, const UtilitySpec& u, double x,
                                     const PrimalSolution& primal, const SolverOptions& opts, int levels) {
  ConjugateCheck c;
  c.u = primal.value;
  c.y_star = primal.marginal;
  auto h = [&](double y) { return solve_dual(market, u, y, opts).value + x * y; };
  c.y_best = c.y_star;
  c.min_dual = h(c.y_star);
  double delta = 1e-2;
  for (int level = 0; level < levels; ++level, delta *= 0.25) {
    const double centre = c.y_best;
    for (double s : {-1.0, 1.0}) {
      const double y = centre * std::exp(s * delta);
      const double val = h(y);
      if (val < c.min_dual) {
        c.min_dual = val;
        c.y_best = y;
      }
    }
  }
  c.gap = c.min_dual - c.u;
  return c;
}

ConjugateCheck conjugate_cross_check(const Market& market, const UtilitySpec& u, double x,
                                     const SolverOptions& opts, int levels) {
  return conjugate_cross_check(market, u, x, solve_primal(market, u, x, opts), opts, levels);
}

}  // namespace txlab
