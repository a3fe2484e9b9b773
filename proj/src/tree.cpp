#include "txlab/tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "txlab/error.hpp"

namespace txlab {

namespace {

constexpr double kProbSumTol = 1e-12;

std::string node_str(int n) { return "node " + std::to_string(n); }

}  // namespace

ScenarioTree::ScenarioTree(std::vector<TreeNode> nodes, int horizon)
    : nodes_(std::move(nodes)), horizon_(horizon) {
  const int n = size();
  if (n == 0) throw StructuralError("tree has no nodes");
  if (horizon_ < 0) throw StructuralError("negative horizon");
  for (int i = 0; i < n; ++i) {
    if (nodes_[i].id != i) throw StructuralError("node ids must be dense 0..N-1 in order");
  }
  if (nodes_[0].parent != -1) throw StructuralError("node 0 must be the root");
  if (nodes_[0].t != 0) throw StructuralError("root must have time index 0");

  std::vector<int> count(n + 1, 0);
  for (int i = 1; i < n; ++i) {
    const int par = nodes_[i].parent;
    if (par < 0 || par >= n || par == i) throw StructuralError(node_str(i) + " has an invalid parent");
    if (!(nodes_[i].p > 0.0 && nodes_[i].p <= 1.0)) {
      throw StructuralError(node_str(i) + " conditional probability outside (0,1]");
    }
    ++count[par];
  }
  child_begin_.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) child_begin_[i + 1] = child_begin_[i] + count[i];
  child_list_.assign(child_begin_[n], 0);
  std::vector<int> fill(child_begin_.begin(), child_begin_.end() - 1);
  for (int i = 1; i < n; ++i) child_list_[fill[nodes_[i].parent]++] = i;

  // Breadth-first order; also detects cycles and unreachable nodes.
  order_.reserve(n);
  order_.push_back(0);
  for (std::size_t k = 0; k < order_.size(); ++k) {
    const int v = order_[k];
    for (int c : children(v)) {
      if (nodes_[c].t != nodes_[v].t + 1) {
        throw StructuralError(node_str(c) + " time index must be parent's plus one");
      }
      order_.push_back(c);
    }
    if (static_cast<int>(order_.size()) > n) throw StructuralError("tree contains a cycle");
  }
  if (static_cast<int>(order_.size()) != n) throw StructuralError("tree has unreachable nodes");

  leaf_index_.assign(n, -1);
  for (int v : order_) {
    if (is_leaf(v)) {
      if (nodes_[v].t != horizon_) throw StructuralError(node_str(v) + " is a leaf before the horizon");
      leaf_index_[v] = static_cast<int>(leaves_.size());
      leaves_.push_back(v);
    } else {
      double s = 0.0;
      for (int c : children(v)) s += nodes_[c].p;
      if (std::abs(s - 1.0) > kProbSumTol) {
        throw StructuralError(node_str(v) + " children probabilities do not sum to one");
      }
      interior_.push_back(v);
    }
  }

  level_begin_.assign(horizon_ + 2, 0);
  for (int v : order_) ++level_begin_[nodes_[v].t + 1];
  for (int t = 0; t <= horizon_; ++t) level_begin_[t + 1] += level_begin_[t];
  level_list_ = order_;  // BFS order is already sorted by level

  prob_.resize(n);
  prob_[0] = 1.0;
  for (int v : order_) {
    if (v != 0) prob_[v] = prob_[nodes_[v].parent] * nodes_[v].p;
    if (!(prob_[v] > 0.0)) throw StructuralError(node_str(v) + " has zero path probability");
  }
}

ScenarioTree ScenarioTree::single_node() { return ScenarioTree({TreeNode{0, -1, 0, 1.0}}, 0); }

Eigen::VectorXd ScenarioTree::conditional_probs() const {
  Eigen::VectorXd p(size());
  for (int i = 0; i < size(); ++i) p[i] = nodes_[i].p;
  return p;
}

std::span<const int> ScenarioTree::level(int t) const {
  if (t < 0 || t > horizon_) throw StructuralError("time index outside 0..T");
  return {level_list_.data() + level_begin_[t], level_list_.data() + level_begin_[t + 1]};
}

bool ScenarioTree::is_ancestor_or_self(int a, int n) const {
  while (n >= 0 && nodes_[n].t >= nodes_[a].t) {
    if (n == a) return true;
    n = nodes_[n].parent;
  }
  return false;
}

ScenarioTree ScenarioTree::with_conditional_probs(const Eigen::VectorXd& p) const {
  if (p.size() != size()) throw StructuralError("conditional probability vector has wrong size");
  auto copy = nodes_;
  for (int i = 1; i < size(); ++i) copy[i].p = p[i];
  return ScenarioTree(std::move(copy), horizon_);
}

double ScenarioTree::expectation_at_leaves(const Process& x) const {
  double s = 0.0;
  for (int l : leaves_) s += prob_[l] * x[l];
  return s;
}

StoppingRegion::StoppingRegion(const ScenarioTree& tree, std::vector<int> nodes)
    : nodes_(std::move(nodes)), member_(tree.size(), 0) {
  std::sort(nodes_.begin(), nodes_.end());
  for (int v : nodes_) {
    if (v < 0 || v >= tree.size()) throw StructuralError("region node out of range");
    if (member_[v]) throw StructuralError("duplicate region node");
    member_[v] = 1;
  }
  std::vector<int> hits(tree.size(), 0);
  for (int v : tree.order()) {
    hits[v] = (v == 0 ? 0 : hits[tree.parent(v)]) + member_[v];
    if (hits[v] > 1) throw StructuralError("region is not an antichain");
  }
  for (int l : tree.leaves()) {
    if (hits[l] != 1) throw StructuralError("region misses a root-to-leaf path");
  }
}

StoppingRegion StoppingRegion::root(const ScenarioTree& tree) { return StoppingRegion(tree, {0}); }

StoppingRegion StoppingRegion::leaves(const ScenarioTree& tree) {
  return StoppingRegion(tree, {tree.leaves().begin(), tree.leaves().end()});
}

StoppingRegion StoppingRegion::level(const ScenarioTree& tree, int t) {
  auto lv = tree.level(t);
  return StoppingRegion(tree, {lv.begin(), lv.end()});
}

int StoppingRegion::stopped_at(const ScenarioTree& tree, int n) const {
  for (int v = n; v >= 0; v = tree.parent(v)) {
    if (member_[v]) return v;
  }
  return -1;
}

double conditional_expectation(const ScenarioTree& tree, const Process& x,
                               const StoppingRegion& region, int node) {
  if (x.size() != tree.size()) throw StructuralError("process size does not match tree");
  if (region.contains(node)) return x[node];
  for (int v = tree.parent(node); v >= 0; v = tree.parent(v)) {
    if (region.contains(v)) throw StructuralError("node lies strictly below the stopping region");
  }
  // Depth-first walk down to the region.
  double acc = 0.0;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (region.contains(v)) {
      acc += tree.prob(v) * x[v];
      continue;
    }
    for (int c : tree.children(v)) stack.push_back(c);
  }
  return acc / tree.prob(node);
}

Process one_step_drift(const ScenarioTree& tree, const Process& x) {
  if (x.size() != tree.size()) throw StructuralError("process size does not match tree");
  Process d = Process::Zero(tree.size());
  for (int v : tree.interior()) {
    double e = 0.0;
    for (int c : tree.children(v)) e += tree.cond_prob(c) * x[c];
    d[v] = x[v] - e;
  }
  return d;
}

const char* to_string(MartingaleKind kind) {
  switch (kind) {
    case MartingaleKind::martingale: return "martingale";
    case MartingaleKind::supermartingale: return "supermartingale";
    case MartingaleKind::submartingale: return "submartingale";
    case MartingaleKind::none: return "none";
  }
  return "none";
}

MartingaleClass classify_martingale(const ScenarioTree& tree, const Process& x, double tol) {
  if (!(tol > 0.0)) throw PreconditionError("classify_martingale requires tol > 0");
  const Process d = one_step_drift(tree, x);
  MartingaleClass out;
  out.max_residual = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
  const double lo = d.minCoeff(), hi = d.maxCoeff();
  if (out.max_residual <= tol) {
    out.kind = MartingaleKind::martingale;
  } else if (lo >= -tol) {
    out.kind = MartingaleKind::supermartingale;
  } else if (hi <= tol) {
    out.kind = MartingaleKind::submartingale;
  } else {
    out.kind = MartingaleKind::none;
  }
  return out;
}

DoobDecomposition doob_decompose(const ScenarioTree& tree, const Process& y, double tol) {
  const Process d = one_step_drift(tree, y);
  DoobDecomposition out{Process(tree.size()), Process(tree.size())};
  out.compensator[0] = 0.0;
  for (int v : tree.order()) {
    if (d[v] < -tol) {
      throw DecompositionError(node_str(v) + " has positive drift; not a supermartingale");
    }
    for (int c : tree.children(v)) out.compensator[c] = out.compensator[v] + d[v];
  }
  out.martingale = y + out.compensator;
  return out;
}

StoppingRegion first_crossing(const ScenarioTree& tree, const Process& x, double lower,
                              double upper, const StoppingRegion& start) {
  if (!(lower < upper)) throw PreconditionError("first_crossing requires lower < upper");
  std::vector<int> out;
  std::vector<int> stack(start.nodes().begin(), start.nodes().end());
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (x[v] <= lower || x[v] >= upper || tree.is_leaf(v)) {
      out.push_back(v);
      continue;
    }
    for (int c : tree.children(v)) stack.push_back(c);
  }
  return StoppingRegion(tree, std::move(out));
}

StoppingRegion truncate(const ScenarioTree& tree, const StoppingRegion& region, int t) {
  if (t < 0 || t > tree.horizon()) throw StructuralError("truncation time outside 0..T");
  std::vector<int> out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (region.contains(v) || tree.time(v) == t) {
      out.push_back(v);
      continue;
    }
    for (int c : tree.children(v)) stack.push_back(c);
  }
  return StoppingRegion(tree, std::move(out));
}

}  // namespace txlab
