#include "txlab/primal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "txlab/barrier.hpp"
#include "txlab/error.hpp"

namespace txlab {

namespace {

using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

// Sparse affine row: constant + Σ coef · z[var].
struct Row {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  void add(const Row& r, double scale) {
    constant += scale * r.constant;
    for (auto [k, v] : r.terms) terms.emplace_back(k, scale * v);
  }
};

class RowBuilder {
 public:
  explicit RowBuilder(int cols) : cols_(cols) {}

  void push(const Row& r, double extra_constant = 0.0) {
    for (auto [k, v] : r.terms) trip_.emplace_back(rows_, k, v);
    offset_.push_back(r.constant + extra_constant);
    ++rows_;
  }
  int rows() const { return rows_; }
  SparseMatrix matrix() const {
    SparseMatrix m(rows_, cols_);
    m.setFromTriplets(trip_.begin(), trip_.end());
    return m;
  }
  VectorXd offset() const { return Eigen::Map<const VectorXd>(offset_.data(), rows_); }

 private:
  int cols_;
  int rows_ = 0;
  std::vector<Triplet> trip_;
  std::vector<double> offset_;
};

// Post-trade bond and stock at each interior node as affine functions of z.
struct Layout {
  std::vector<int> interior_index;
  std::vector<Row> bond, stock;
};

Layout make_layout(const Market& m, double x, bool net) {
  const auto& tree = m.tree();
  const int ni = static_cast<int>(tree.interior().size());
  Layout L;
  L.interior_index.assign(tree.size(), -1);
  for (int k = 0; k < ni; ++k) L.interior_index[tree.interior()[k]] = k;
  L.bond.resize(tree.size());
  L.stock.resize(tree.size());
  for (int v : tree.order()) {
    if (tree.is_leaf(v)) continue;
    const int k = L.interior_index[v];
    Row bond, stock;
    if (v == 0) {
      bond.constant = x;
    } else {
      bond = L.bond[tree.parent(v)];
      stock = L.stock[tree.parent(v)];
    }
    if (net) {
      stock.terms.emplace_back(k, 1.0);
      bond.terms.emplace_back(k, -m.ask(v));
    } else {
      stock.terms.emplace_back(k, 1.0);
      stock.terms.emplace_back(ni + k, -1.0);
      bond.terms.emplace_back(k, -m.ask(v));
      bond.terms.emplace_back(ni + k, m.bid(v));
    }
    L.bond[v] = std::move(bond);
    L.stock[v] = std::move(stock);
  }
  return L;
}

double utility_scale(const UtilitySpec& u, double x) { return std::abs(x * marginal_utility(u, x)); }

// Nets simultaneous buys and sells and appends the forced leaf liquidation.
TradingStrategy finish_strategy(const Market& m, Process buy, Process sell) {
  const auto& tree = m.tree();
  Process stock = Process::Zero(tree.size());
  for (int v : tree.order()) {
    if (tree.is_leaf(v)) {
      const double held = v == 0 ? 0.0 : stock[tree.parent(v)];
      buy[v] = std::max(-held, 0.0);
      sell[v] = std::max(held, 0.0);
      stock[v] = 0.0;
      continue;
    }
    const double k = std::min(buy[v], sell[v]);
    buy[v] -= k;
    sell[v] -= k;
    stock[v] = (v == 0 ? 0.0 : stock[tree.parent(v)]) + buy[v] - sell[v];
  }
  return {std::move(buy), std::move(sell)};
}

}  // namespace

PrimalSolution solve_primal(const Market& market, const UtilitySpec& u, double x, const SolverOptions& opts) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("initial endowment must be positive");
  const auto& tree = market.tree();
  const auto leaves = tree.leaves();
  const int ni = static_cast<int>(tree.interior().size());
  const int nl = static_cast<int>(leaves.size());
  const bool net = market.frictionless();
  const double scale = utility_scale(u, x);

  PrimalSolution sol;
  if (ni == 0) {
    sol.strategy = TradingStrategy::zero(tree);
    sol.holdings = holdings(market, sol.strategy, x);
    sol.terminal_wealth = VectorXd::Constant(1, x);
    sol.value = utility(u, x);
    sol.marginal = marginal_utility(u, x);
    return sol;
  }

  const Layout L = make_layout(market, x, net);
  const int nz = net ? ni : 2 * ni + nl;

  RowBuilder obj(nz), ineq(nz);
  for (int j = 0; j < nl; ++j) {
    const int l = leaves[j];
    const int p = tree.parent(l);
    Row g = L.bond[p];
    if (net) {
      g.add(L.stock[p], market.ask(l));
    } else {
      g.add(L.stock[p], market.bid(l));
      g.terms.emplace_back(2 * ni + j, -market.lambda() * market.ask(l));
    }
    obj.push(g);
  }
  if (!net) {
    for (int k = 0; k < 2 * ni + nl; ++k) ineq.push(Row{0.0, {{k, 1.0}}});
    for (int j = 0; j < nl; ++j) {
      Row r = L.stock[tree.parent(leaves[j])];
      r.terms.emplace_back(2 * ni + j, 1.0);
      ineq.push(r);
    }
  }
  const int liq_begin = ineq.rows();
  for (int v : tree.interior()) {
    Row at_ask = L.bond[v];
    at_ask.add(L.stock[v], market.ask(v));
    ineq.push(at_ask);
    if (!net) {
      Row at_bid = L.bond[v];
      at_bid.add(L.stock[v], market.bid(v));
      ineq.push(at_bid);
    }
  }

  VectorXd leaf_p(nl);
  for (int j = 0; j < nl; ++j) leaf_p[j] = tree.prob(leaves[j]);

  BarrierProblem prob;
  prob.objective_map = obj.matrix();
  prob.objective_offset = obj.offset();
  prob.objective = [&](const VectorXd& a, VectorXd& f, VectorXd& df, VectorXd& d2f) {
    f.resize(a.size());
    df.resize(a.size());
    d2f.resize(a.size());
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      const double w = leaf_p[j] / scale;
      f[j] = -w * utility(u, a[j]);
      df[j] = -w * marginal_utility(u, a[j]);
      d2f[j] = -w * utility_curvature(u, a[j]);
    }
  };
  prob.inequality = ineq.matrix();
  prob.inequality_offset = ineq.offset();

  VectorXd z0 = VectorXd::Zero(nz);
  if (!net) {
    for (int k = 0; k < ni; ++k) {
      const double e = opts.start_eps * x / market.ask(tree.interior()[k]);
      z0[k] = z0[ni + k] = e;
    }
    for (int j = 0; j < nl; ++j) z0[2 * ni + j] = opts.start_eps * x / market.ask(leaves[j]);
  }

  BarrierOptions bo;
  bo.tol = opts.tol;
  bo.max_iter = opts.max_iter;
  bo.barrier_decay = opts.barrier_decay;
  bo.barrier_final = opts.barrier_final;
  BarrierResult res;
  try {
    res = minimize_with_barrier(prob, z0, bo);
  } catch (const NumericError& e) {
    throw SolverError(std::string("primal solve failed: ") + e.what(), 0.0, 0);
  }

  Process buy = Process::Zero(tree.size()), sell = Process::Zero(tree.size());
  for (int k = 0; k < ni; ++k) {
    const int v = tree.interior()[k];
    if (net) {
      buy[v] = std::max(res.z[k], 0.0);
      sell[v] = std::max(-res.z[k], 0.0);
    } else {
      buy[v] = std::max(res.z[k], 0.0);
      sell[v] = std::max(res.z[ni + k], 0.0);
    }
  }
  sol.strategy = finish_strategy(market, std::move(buy), std::move(sell));
  sol.holdings = holdings(market, sol.strategy, x);
  sol.terminal_wealth.resize(nl);
  for (int j = 0; j < nl; ++j) sol.terminal_wealth[j] = sol.holdings.bond[leaves[j]];
  if (!(sol.terminal_wealth.minCoeff() >= 1e-12 * x)) {
    throw SolverError("terminal wealth collapsed to zero at a leaf", -res.objective * scale, res.iterations);
  }
  double value = 0.0, marginal = 0.0;
  for (int j = 0; j < nl; ++j) {
    value += leaf_p[j] * utility(u, sol.terminal_wealth[j]);
    marginal += leaf_p[j] * marginal_utility(u, sol.terminal_wealth[j]);
  }
  marginal += scale * res.inequality_multiplier.segment(liq_begin, ineq.rows() - liq_begin).sum();
  sol.value = value;
  sol.marginal = marginal;
  sol.diagnostics = {res.iterations, res.final_barrier, res.kkt_residual};
  return sol;
}

double brute_force_primal(const Market& market, const UtilitySpec& u, double x, int grid_size) {
  if (!(x > 0.0)) throw DomainError("initial endowment must be positive");
  if (grid_size < 3) throw PreconditionError("grid size must be at least 3");
  const auto& tree = market.tree();
  const auto interior = tree.interior();
  const int k = static_cast<int>(interior.size());
  if (k > 3) throw PreconditionError("brute force oracle is limited to three trading nodes");
  if (k == 0) return utility(u, x);

  // Net trade d per trading node; the forced liquidation happens at the leaves.
  Process bond(tree.size()), stock(tree.size());
  std::vector<int> slot(tree.size(), -1);
  for (int i = 0; i < k; ++i) slot[interior[i]] = i;
  auto value_at = [&](const std::vector<double>& d) {
    double total = 0.0;
    for (int v : tree.order()) {
      const double b0 = v == 0 ? x : bond[tree.parent(v)];
      const double s0 = v == 0 ? 0.0 : stock[tree.parent(v)];
      const double trade = tree.is_leaf(v) ? -s0 : d[slot[v]];
      stock[v] = s0 + trade;
      bond[v] = b0 - (trade > 0 ? market.ask(v) * trade : market.bid(v) * trade);
      const double liq = bond[v] + (stock[v] > 0 ? market.bid(v) : market.ask(v)) * stock[v];
      if (tree.is_leaf(v)) {
        if (!(bond[v] > 0.0)) return -std::numeric_limits<double>::infinity();
        total += tree.prob(v) * utility(u, bond[v]);
      } else if (liq < 0.0) {
        return -std::numeric_limits<double>::infinity();
      }
    }
    return total;
  };

  std::vector<double> best(k, 0.0), point(k);
  double best_value = value_at(best);
  double box = x / market.price().minCoeff();
  for (int expand = 0; expand < 30; ++expand) {
    std::vector<double> centre(k, 0.0);
    double radius = box;
    for (int level = 0; level < 200 && radius > 1e-13 * box; ++level) {
      std::vector<int> idx(k, 0);
      const double step = 2.0 * radius / (grid_size - 1);
      std::vector<double> level_best = centre;
      double level_value = value_at(centre);
      for (;;) {
        for (int i = 0; i < k; ++i) point[i] = centre[i] - radius + step * idx[i];
        const double val = value_at(point);
        if (val > level_value) {
          level_value = val;
          level_best = point;
        }
        int i = 0;
        while (i < k && ++idx[i] == grid_size) idx[i++] = 0;
        if (i == k) break;
      }
      centre = level_best;
      radius *= 0.5;
    }
    const double val = value_at(centre);
    if (val > best_value) {
      best_value = val;
      best = centre;
    }
    bool on_edge = false;
    for (int i = 0; i < k; ++i) on_edge = on_edge || std::abs(best[i]) > 0.9 * box;
    if (!on_edge) break;
    box *= 4.0;
  }
  return best_value;
}

std::vector<CurvePoint> u_curve(const Market& market, const UtilitySpec& u, std::span<const double> xs,
                                const SolverOptions& opts) {
  constexpr double h = 1e-4;
  std::vector<CurvePoint> out;
  double prev = 0.0;
  for (double x : xs) {
    if (!(x > 0.0)) throw DomainError("u_curve needs positive endowments");
    if (!out.empty() && !(x > prev)) throw PreconditionError("u_curve needs sorted endowments");
    prev = x;
    const auto sol = solve_primal(market, u, x, opts);
    const double up = solve_primal(market, u, x * (1 + h), opts).value;
    const double dn = solve_primal(market, u, x * (1 - h), opts).value;
    out.push_back({x, sol.value, sol.marginal, (up - dn) / (2 * h * x)});
  }
  return out;
}

}  // namespace txlab
