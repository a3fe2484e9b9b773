#include "txlab/cps.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "txlab/error.hpp"

namespace txlab {

namespace {

constexpr double kEdge = 0.25;  // relative distance from an interval edge

// Positive weights on children with Σ q s = v, given values on both sides of v
// (or all equal to v, in which case the reference weights are kept).
void balance(std::span<const int> kids, const Process& s, double v, const ScenarioTree& tree,
             Process& cond_q) {
  int below = 0, above = 0;
  for (int c : kids) {
    below += s[c] < v;
    above += s[c] > v;
  }
  if (below == 0 && above == 0) {
    for (int c : kids) cond_q[c] = tree.cond_prob(c);
    return;
  }
  double total = 0.0, mean = 0.0;
  for (int c : kids) {
    if (s[c] < v) cond_q[c] = 1.0 / (below * (v - s[c]));
    if (s[c] > v) cond_q[c] = 1.0 / (above * (s[c] - v));
    if (s[c] != v) mean += cond_q[c];
  }
  mean /= below + above;
  for (int c : kids) {
    if (s[c] == v) cond_q[c] = mean;
    total += cond_q[c];
  }
  for (int c : kids) cond_q[c] /= total;
}

}  // namespace

StrictCps strictly_consistent_prices(const Market& market) {
  const auto& tree = market.tree();
  const auto& S = market.price();
  const int n = tree.size();
  StrictCps out{Process::Ones(n), Process::Ones(n), Process(n)};
  const auto order = tree.order();

  if (market.frictionless()) {
    for (int v : tree.interior()) {
      double lo = S[v], hi = S[v];
      bool all_equal = true;
      for (int c : tree.children(v)) {
        lo = std::min(lo, S[c]);
        hi = std::max(hi, S[c]);
        all_equal = all_equal && S[c] == S[v];
      }
      if (!all_equal && !(lo < S[v] && S[v] < hi)) {
        throw InfeasibilityError("no martingale measure: price at node " + std::to_string(v) +
                                     " lies outside the open hull of its successors",
                                 v, lo, hi);
      }
      balance(tree.children(v), S, S[v], tree, out.cond_q);
    }
    out.ratio = S;
  } else {
    const double lam = market.lambda();
    Process lo(n), hi(n);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int v = *it;
      const double bid = (1.0 - lam) * S[v], ask = S[v];
      if (tree.is_leaf(v)) {
        lo[v] = bid;
        hi[v] = ask;
        continue;
      }
      double a = std::numeric_limits<double>::infinity(), b = -a;
      for (int c : tree.children(v)) {
        a = std::min(a, lo[c]);
        b = std::max(b, hi[c]);
      }
      lo[v] = std::max(a, bid);
      hi[v] = std::min(b, ask);
      if (!(hi[v] - lo[v] > 1e-14 * ask)) {
        throw InfeasibilityError("no consistent price system: attainable prices at node " + std::to_string(v) +
                                     " miss the bid-ask spread",
                                 v, a, b);
      }
    }
    out.ratio[0] = 0.5 * (lo[0] + hi[0]);
    Process s(n);
    for (int v : order) {
      if (tree.is_leaf(v)) continue;
      const double target = out.ratio[v];
      const auto kids = tree.children(v);
      for (int c : kids) {
        const double w = hi[c] - lo[c];
        if (target <= lo[c]) {
          s[c] = lo[c] + kEdge * w;
        } else if (target >= hi[c]) {
          s[c] = hi[c] - kEdge * w;
        } else {
          s[c] = target;
        }
      }
      bool below = false, above = false;
      for (int c : kids) {
        below = below || s[c] < target;
        above = above || s[c] > target;
      }
      if (below != above) {
        // One side is empty: pull a child that straddles the target across.
        for (int c : kids) {
          if (s[c] != target) continue;
          if (above && lo[c] < target) {
            s[c] = 0.5 * (lo[c] + target);
            break;
          }
          if (below && hi[c] > target) {
            s[c] = 0.5 * (hi[c] + target);
            break;
          }
        }
      }
      balance(kids, s, target, tree, out.cond_q);
      for (int c : kids) out.ratio[c] = s[c];
    }
  }
  for (int v : order) {
    if (v != 0) out.q[v] = out.q[tree.parent(v)] * out.cond_q[v];
  }
  return out;
}

}  // namespace txlab
