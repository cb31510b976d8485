// Backward recursion of robust value functions on a geometric wealth grid.
#pragma once

#include <map>
#include <optional>

#include "rum/maxmin.hpp"

namespace rum {

struct WealthGridSpec {
  double x0 = 1.0;
  int knots = 257;
  double floor_factor = 1e-3;   // lowest knot as a fraction of x0
  double cap_multiplier = 0.0;  // highest knot as a multiple of x0; 0 derives
                                // it from the per-slice nondegeneracy margins
  // The interchange of sup and inf behind the recursion needs a utility
  // bounded from above. On a finite tree the integrability half is automatic,
  // so callers may opt in for unbounded families; the recursion itself is
  // unchanged.
  bool allow_unbounded = false;
  int probes_per_node = 8;  // segment-midpoint defect probes per node
};

struct ValueField {
  const ScenarioTree* tree = nullptr;
  const UtilitySpec* utility = nullptr;
  std::vector<std::optional<ConcavePLF>> value;  // non-terminal non-polar nodes
  std::vector<char> nonpolar;
  double x0 = 1.0;
  double eps_grid = 0.0;      // total discretization budget
  double wealth_bound = 0.0;  // admissible wealth never exceeds this
  Vec slice_eps;              // per decision slice: repair + probe defect + tol
  std::map<NodeId, double> margins;

  // Stored value at a node: interpolated grid function below the horizon,
  // terminal utility (with endowment) at the horizon.
  double value_at(NodeId n, double wealth) const;
};

// Solves every non-polar node backward in time on a geometric wealth grid,
// fitting a concave nondecreasing interpolant per node (concavity repairs and
// midpoint defects are accumulated into eps_grid). Requires the tree-wide
// arbitrage check to pass and, without the opt-in, a bounded-above utility.
ValueField backward_induction(const ScenarioTree& tree, const UtilitySpec& utility,
                              const WealthGridSpec& grid, double tol = 1e-8);

struct ExtractResult {
  Strategy strategy;
  double value = 0.0;      // certified: exact worst case of the strategy
                           // against the stored terminal utilities
  double max_wealth = 0.0; // largest wealth reached at a non-polar node
};

// Re-solves each visited node at its exact wealth (not the grid) and returns
// the induced strategy together with its certified terminal worst case.
ExtractResult extract_strategy(const ScenarioTree& tree, const ValueField& field, double x0,
                               double tol = 1e-8);

struct InequalityReport {
  Vec chain;  // worst-case expected stored value at t = 0..T
  double eps = 0.0;
  bool nonincreasing = true;
  double spread = 0.0;  // max - min over finite chain entries
  double terminal_minus_root = 0.0;
};

// Evaluates the worst-case expected stored value of a strategy at every time
// slice. For any admissible strategy the chain decreases within eps; for an
// optimal one it is flat within eps.
InequalityReport verify_value_inequalities(const ScenarioTree& tree, const ValueField& field,
                                           const Strategy& strategy, double x0);

}  // namespace rum
