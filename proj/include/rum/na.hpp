// Quasi-sure support geometry and the one-period no-arbitrage check.
#pragma once

#include <map>
#include <optional>

#include "rum/model.hpp"

namespace rum::na {

// Price-increment geometry at one node, restricted to children that carry
// positive probability under at least one extreme measure.
struct SupportData {
  NodeId node = -1;
  std::vector<NodeId> children;    // non-polar children, in slot order
  std::vector<int> child_slots;    // slot of each child within the parent
  Mat vectors;                     // price increments v_i, one per child
  Mat basis;                       // orthonormal basis of span{v_i}, dim() rows
  Mat coords;                      // v_i in basis coordinates, dim() entries each
  Mat projector;                   // d x d orthogonal projector onto the span
  double scale = 0.0;              // max increment norm

  int dim() const { return static_cast<int>(basis.size()); }
};

// Rank-revealing Gram-Schmidt with cutoff 1e-10 (relative to the largest
// increment norm) determines the span.
SupportData compute_support(const ScenarioTree& tree, NodeId node);

// Orthogonal projection onto span{v_i}. Payoffs h . v_i are invariant under
// it, so admissible holdings can always be taken inside the span.
Vec project_to_span(const SupportData& support, const Vec& h);

struct NAResult {
  bool holds = true;
  // On violation: a unit h in the span with h.v_i >= 0 for all i and > 0 for
  // some i (within 1e-9).
  std::optional<Vec> witness;
};

// One-period arbitrage test. The LP maximizes capped positive gains subject
// to all gains being nonnegative; its optimum is 0 exactly when no such
// direction exists, and at least 1 otherwise (gains scale), so the 1e-9
// threshold is razor sharp.
NAResult check_node(const SupportData& support);

// check_node at every non-terminal non-polar node. The market satisfies the
// quasi-sure no-arbitrage condition exactly when all entries hold: local
// absence of arbitrage stitches to global on a finite tree.
std::map<NodeId, NAResult> check_tree(const ScenarioTree& tree);

inline bool all_hold(const std::map<NodeId, NAResult>& results) {
  for (const auto& [node, r] : results)
    if (!r.holds) return false;
  return true;
}

// K_x: holdings h in the span with x + h.v_i >= 0 for all i. Compact exactly
// when the node passes the arbitrage check.
struct AdmissiblePolytope {
  NodeId node = -1;
  double capital = 0.0;
  Mat gains;     // v_i rows: constraint capital + h.v_i >= 0
  Mat subspace;  // orthonormal basis of the span
  bool bounded = false;

  bool contains(const Vec& h, double tol = 1e-9) const;
};

AdmissiblePolytope admissible_polytope(const SupportData& support, double x);

// Uniform nondegeneracy radius: min over unit u in the span of max_i u.v_i,
// i.e. the largest ball around the origin inside conv{v_i}. Computed by facet
// enumeration (dim <= 3) with a 1e-8 one-sidedness tolerance. Requires the
// arbitrage check to pass (otherwise throws); +infinity for an empty span.
double nondegeneracy_margin(const SupportData& support);

}  // namespace rum::na
