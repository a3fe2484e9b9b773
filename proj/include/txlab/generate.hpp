#pragma once

#include <cstdint>
#include <string_view>

#include "txlab/market.hpp"

namespace txlab {

enum class TreeKind { binomial, trinomial, random };

TreeKind parse_tree_kind(std::string_view text);

struct GeneratorConfig {
  TreeKind kind = TreeKind::binomial;
  int depth = 2;
  int branching = 3;    ///< upper bound for random trees
  double vol = 0.2;     ///< one-step log-return scale
  double lambda = 0.1;
  double s0 = 1.0;
  std::uint64_t seed = 1;
};

/// Binomial: S e^{±vol} with p = 1/2. Trinomial: S e^{vol}, S, S e^{−vol}
/// with p = (1/4, 1/2, 1/4). Random: 2..branching children per node with
/// random weights and log-returns in [−vol, vol], one child forced up and one
/// forced down so that every node admits a martingale measure.
Market generate_market(const GeneratorConfig& cfg);

}  // namespace txlab
