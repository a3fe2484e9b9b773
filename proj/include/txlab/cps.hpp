#pragma once

#include "txlab/market.hpp"

namespace txlab {

/// A strictly consistent price system in measure form: a probability Q with
/// full support on the tree and a Q-martingale S̃ strictly inside the spread
/// (on the spread itself when λ = 0).
struct StrictCps {
  Process cond_q;  ///< conditional Q weights, 1 at the root
  Process q;       ///< unconditional Q node probabilities
  Process ratio;   ///< S̃
};

/// Constructs a strictly consistent price system by backward induction of the
/// open intervals of attainable S̃ values, followed by a top-down selection.
///
/// Throws InfeasibilityError naming the first node (in backward order) where
/// the attainable interval misses the spread.
StrictCps strictly_consistent_prices(const Market& market);

}  // namespace txlab
