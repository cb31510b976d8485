// Scenario trees, measure sets, utilities and the admissibility primitives.
#pragma once

#include <string>
#include <vector>

#include "rum/numeric.hpp"
#include "rum/plf.hpp"

namespace rum {

using NodeId = int;

// The uncertainty at a node: the extreme points of a convex set of one-step
// transition laws over the node's children. Worst cases over the hull are
// attained at extreme points, so only those are stored.
struct MeasureSet {
  Mat extremes;  // each row is a probability vector over the children

  std::size_t count() const { return extremes.size(); }
};

struct Node {
  std::string name;
  NodeId parent = -1;
  int time = 0;
  Vec price;  // S at this node, one entry per asset
  std::vector<NodeId> children;
  MeasureSet measures;      // non-terminal nodes only
  double endowment = 0.0;   // terminal nodes only, used when the utility enables it
};

struct ScenarioTree {
  int horizon = 0;      // T
  int asset_count = 0;  // d
  NodeId root = 0;
  std::vector<Node> nodes;

  bool is_terminal(NodeId n) const { return nodes[n].children.empty(); }
  const Vec& price(NodeId n) const { return nodes[n].price; }

  // Slot of child c within parent p's child list, -1 if absent.
  int child_slot(NodeId p, NodeId c) const;
};

// A node is kept (non-polar) when every edge on its root path carries positive
// probability under at least one extreme measure. "Positive" is an exact
// comparison against 0.0: polarity is a structural property of the stored
// extremes, not a numeric threshold.
std::vector<char> nonpolar_mask(const ScenarioTree& tree);

// Node ids grouped by time, each group sorted ascending.
std::vector<std::vector<NodeId>> nodes_by_time(const ScenarioTree& tree);

enum class UtilityFamily { Log, Power, ExponentialBounded, PiecewiseLinear };

// Concave nondecreasing utility on [0, infinity), possibly -infinity at 0.
// Parameter validation happens in the factories; an invalid family/parameter
// combination never constructs.
class UtilitySpec {
 public:
  static UtilitySpec log_utility();
  static UtilitySpec power(double gamma);        // x^gamma, gamma in (0,1)
  static UtilitySpec exponential(double alpha);  // 1 - exp(-alpha x), alpha > 0
  static UtilitySpec piecewise(Vec knots, Vec values);

  UtilityFamily family() const { return family_; }
  double gamma() const { return gamma_; }
  double alpha() const { return alpha_; }
  const ConcavePLF& plf() const { return plf_; }

  // U(x). Floor sentinel for x < 0; at x == 0 the floor only when diverging.
  double value(double x) const;
  // U'(x) for x > 0; left derivative at kinks of the piecewise family.
  double derivative(double x) const;
  // U''(x) for the smooth families, 0 for the piecewise one.
  double second_derivative(double x) const;

  bool diverges_at_zero() const { return family_ == UtilityFamily::Log; }
  bool smooth() const { return family_ != UtilityFamily::PiecewiseLinear; }
  bool bounded_above() const;
  double upper_bound() const;  // only meaningful when bounded_above()

  bool endowment_enabled() const { return endowment_enabled_; }
  void enable_endowment(bool on) { endowment_enabled_ = on; }

 private:
  UtilitySpec() = default;
  UtilityFamily family_ = UtilityFamily::Log;
  double gamma_ = 0.5;
  double alpha_ = 1.0;
  ConcavePLF plf_;
  bool endowment_enabled_ = false;
};

// U(x + e) with the floor sentinel whenever x + e leaves the domain. The
// endowment is ignored unless the utility enables it.
double evaluate_utility(const UtilitySpec& u, double x, double endowment = 0.0);

// Predictable trading strategy: holdings (units per asset) chosen at each
// non-terminal node and applied over the following period.
struct Strategy {
  Mat holdings;  // indexed by NodeId; empty vector means zero holdings

  const Vec* at(NodeId n) const {
    if (n < 0 || static_cast<std::size_t>(n) >= holdings.size()) return nullptr;
    if (holdings[n].empty()) return nullptr;
    return &holdings[n];
  }
};

struct ValidationIssue {
  NodeId node = -1;
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Structural and probabilistic sanity of a tree: unique root, parent/child
// consistency, uniform terminal depth, price dimensions, measure shapes,
// probability sums within 1e-12, endowments only at terminals, and price
// nonnegativity at non-polar nodes.
ValidationReport validate_tree(const ScenarioTree& tree);

// Wealth sequence x_0, ..., x_T along a root-to-terminal path of node ids,
// self-financing with the given strategy. Affine in x0 for fixed strategy.
Vec wealth_along_path(const ScenarioTree& tree, const Strategy& strategy, double x0,
                      const std::vector<NodeId>& path);

// Root-to-node path (inclusive).
std::vector<NodeId> path_to(const ScenarioTree& tree, NodeId n);

}  // namespace rum
