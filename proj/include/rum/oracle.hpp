// Exhaustive reference computations: selector enumeration and grid search.
// This module never calls the solver, recursion or arbitrage kernels; it is
// the independent check those are validated against.
#pragma once

#include <cstddef>
#include <optional>

#include "rum/model.hpp"

namespace rum::oracle {

// Non-polar terminal nodes, ascending id. The probability entries of a
// selector product follow this order.
std::vector<NodeId> terminals(const ScenarioTree& tree);

struct SelectorProduct {
  std::vector<int> choice;  // extreme index per node id; -1 where not applicable
  Vec terminal_prob;        // per entry of terminals(tree)
};

// Every combination of one extreme measure per non-polar non-terminal node,
// with path probabilities multiplied edge by edge. Throws cap_error instead
// of sampling when the product exceeds the cap.
std::vector<SelectorProduct> enumerate_selectors(const ScenarioTree& tree,
                                                 std::size_t cap = 1000000);

struct WorstCase {
  double value = kValueFloor;
  int selector = -1;                              // argmin, lowest index on ties
  std::optional<std::vector<NodeId>> violation;   // path to a negative-wealth node
};

// Exact infimum over the enumerated selector products of the expected
// terminal utility of a strategy. An inadmissible strategy (negative wealth
// at a non-polar node, tolerance 1e-9) yields the floor sentinel and the
// violating root path.
WorstCase worst_case_expected_utility(const ScenarioTree& tree, const Strategy& strategy,
                                      const UtilitySpec& utility, double x0,
                                      std::size_t selector_cap = 1000000);

struct GridSpec {
  double step = 0.0625;
  double box_radius = 0.0;  // 0: bound each node's range by direction sampling
  std::size_t strategy_cap = 1000000;
  std::size_t selector_cap = 1000000;
};

struct BruteForce {
  double value = kValueFloor;
  Strategy best;
  bool bounded_warning = false;  // a feasible grid point touched the search box
  std::size_t strategies = 0;    // complete strategy assignments evaluated
};

// Global maximum of the selector worst case over all strategies whose
// holdings lie on the step-lattice, wealth-feasible at every charged node.
// Enumeration is depth-first over nodes in time order; caps fail loudly.
BruteForce brute_force_value(const ScenarioTree& tree, const UtilitySpec& utility, double x0,
                             const GridSpec& grid = {});

}  // namespace rum::oracle
