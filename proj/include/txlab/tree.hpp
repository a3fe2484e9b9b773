#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace txlab {

/// One real value per tree node, indexed by node id.
using Process = Eigen::VectorXd;

struct TreeNode {
  int id = 0;
  int parent = -1;  ///< -1 at the root
  int t = 0;
  double p = 1.0;  ///< conditional probability given the parent
};

/// Finite filtered probability space as a rooted tree.
///
/// Node ids are dense 0..N-1 with the root at 0. Only conditional transition
/// weights are part of the data model; unconditional node probabilities are
/// derived from them at construction.
class ScenarioTree {
 public:
  ScenarioTree(std::vector<TreeNode> nodes, int horizon);

  /// Zero-horizon tree consisting of the root only.
  static ScenarioTree single_node();

  int size() const noexcept { return static_cast<int>(nodes_.size()); }
  int horizon() const noexcept { return horizon_; }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  int parent(int n) const { return nodes_[n].parent; }
  int time(int n) const { return nodes_[n].t; }
  double cond_prob(int n) const { return nodes_[n].p; }
  double prob(int n) const { return prob_[n]; }
  const Eigen::VectorXd& probs() const noexcept { return prob_; }
  Eigen::VectorXd conditional_probs() const;

  std::span<const int> children(int n) const {
    return {child_list_.data() + child_begin_[n],
            child_list_.data() + child_begin_[n + 1]};
  }
  bool is_leaf(int n) const { return child_begin_[n] == child_begin_[n + 1]; }

  /// Parents before children (breadth first).
  std::span<const int> order() const noexcept { return order_; }
  std::span<const int> leaves() const noexcept { return leaves_; }
  std::span<const int> interior() const noexcept { return interior_; }
  std::span<const int> level(int t) const;
  /// Position of a leaf in leaves(), -1 for interior nodes.
  int leaf_index(int n) const { return leaf_index_[n]; }

  bool is_ancestor_or_self(int a, int n) const;

  /// Same structure with new conditional weights (validated).
  ScenarioTree with_conditional_probs(const Eigen::VectorXd& p) const;

  /// Σ_leaves P(leaf) x(leaf).
  double expectation_at_leaves(const Process& x) const;

 private:
  std::vector<TreeNode> nodes_;
  int horizon_ = 0;
  std::vector<int> child_begin_, child_list_;
  std::vector<int> order_, leaves_, interior_, leaf_index_;
  std::vector<int> level_begin_, level_list_;
  Eigen::VectorXd prob_;
};

/// Stopping time on a tree: an antichain that meets every root-to-leaf path
/// exactly once.
class StoppingRegion {
 public:
  StoppingRegion(const ScenarioTree& tree, std::vector<int> nodes);

  static StoppingRegion root(const ScenarioTree& tree);
  static StoppingRegion leaves(const ScenarioTree& tree);
  static StoppingRegion level(const ScenarioTree& tree, int t);

  std::span<const int> nodes() const noexcept { return nodes_; }
  bool contains(int n) const { return member_[n] != 0; }
  /// Region node that is an ancestor of (or equal to) n, -1 if n lies above.
  int stopped_at(const ScenarioTree& tree, int n) const;

 private:
  std::vector<int> nodes_;
  std::vector<char> member_;
};

/// E[X_τ | F_node] for a node on or above the region τ.
double conditional_expectation(const ScenarioTree& tree, const Process& x,
                               const StoppingRegion& region, int node);

/// Node-wise x(n) − E[x_{t+1} | F_n]; zero at leaves.
Process one_step_drift(const ScenarioTree& tree, const Process& x);

enum class MartingaleKind { martingale, supermartingale, submartingale, none };

const char* to_string(MartingaleKind kind);

struct MartingaleClass {
  MartingaleKind kind = MartingaleKind::martingale;
  double max_residual = 0.0;  ///< max |one-step drift|
};

MartingaleClass classify_martingale(const ScenarioTree& tree, const Process& x, double tol);

/// Y = M − A with M a martingale and A predictable, non-decreasing, A(root) = 0.
struct DoobDecomposition {
  Process martingale;
  Process compensator;
};

/// Throws DecompositionError if some one-step drift is below −tol.
DoobDecomposition doob_decompose(const ScenarioTree& tree, const Process& y, double tol = 1e-10);

/// Per path, the first node at or after `start` with x <= lower or x >= upper;
/// the leaf if no such node exists.
StoppingRegion first_crossing(const ScenarioTree& tree, const Process& x, double lower,
                              double upper, const StoppingRegion& start);

/// τ ∧ t: nodes of the region at time < t, or the level-t ancestor otherwise.
StoppingRegion truncate(const ScenarioTree& tree, const StoppingRegion& region, int t);

}  // namespace txlab
