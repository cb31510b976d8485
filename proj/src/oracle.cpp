#include "rum/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rum/errors.hpp"

namespace rum::oracle {
namespace {

constexpr double kWealthTol = 1e-9;

std::vector<NodeId> decision_nodes(const ScenarioTree& tree, const std::vector<char>& nonpolar) {
  std::vector<NodeId> out;
  for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
    if (nonpolar[n] && !tree.is_terminal(n)) out.push_back(n);
  }
  std::stable_sort(out.begin(), out.end(), [&](NodeId a, NodeId b) {
    if (tree.nodes[a].time != tree.nodes[b].time) return tree.nodes[a].time < tree.nodes[b].time;
    return a < b;
  });
  return out;
}

// Price increments toward the charged children of one node.
struct NodeMoves {
  NodeId node = -1;
  std::vector<NodeId> children;
  Mat deltas;
};

NodeMoves moves_of(const ScenarioTree& tree, NodeId n, const std::vector<char>& nonpolar) {
  NodeMoves m;
  m.node = n;
  for (NodeId c : tree.nodes[n].children) {
    if (!nonpolar[c]) continue;
    m.children.push_back(c);
    Vec d(tree.asset_count);
    for (int a = 0; a < tree.asset_count; ++a) d[a] = tree.price(c)[a] - tree.price(n)[a];
    m.deltas.push_back(std::move(d));
  }
  return m;
}

// Unit directions used to bound the feasible holdings of one node. Dense
// enough that the sampled support minimum, minus the Lipschitz slack of the
// angular gap, still lower-bounds the true minimum.
Mat sample_directions(int d) {
  Mat dirs;
  if (d == 1) {
    dirs.push_back({1.0});
    dirs.push_back({-1.0});
  } else if (d == 2) {
    const int n = 4096;
    for (int i = 0; i < n; ++i) {
      double a = 2.0 * M_PI * i / n;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
  } else {
    const int n = 8192;  // Fibonacci sphere
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / n;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double a = golden * i;
      dirs.push_back({r * std::cos(a), r * std::sin(a), z});
    }
  }
  return dirs;
}

double angular_gap(int d) {
  if (d == 1) return 0.0;
  if (d == 2) return M_PI / 4096;
  return std::sqrt(4.0 * M_PI / 8192);
}

// Lower bound on min over unit u of max_i u . delta_i, or 0 when the sampled
// estimate cannot certify positivity. Holdings then satisfy |h| <= w / bound.
double sampled_margin(const NodeMoves& m, int d) {
  if (m.deltas.empty()) return 0.0;
  double scale = 0.0;
  for (const Vec& v : m.deltas) scale = std::max(scale, norm2(v));
  if (scale == 0.0) return 0.0;
  Mat dirs = sample_directions(d);
  double lo = std::numeric_limits<double>::infinity();
  for (const Vec& u : dirs) {
    double best = -std::numeric_limits<double>::infinity();
    for (const Vec& v : m.deltas) best = std::max(best, dot(u, v));
    lo = std::min(lo, best);
  }
  double bound = lo - scale * angular_gap(d);
  return bound > 0.0 ? bound : 0.0;
}

struct Search {
  const ScenarioTree* tree;
  const UtilitySpec* utility;
  GridSpec spec;
  std::vector<NodeId> decisions;
  std::vector<NodeMoves> moves;
  Vec margins;  // per decision node, 0 when uncertified
  std::vector<NodeId> leaves;
  std::vector<int> leaf_slot;  // node id -> index in leaves, -1 otherwise
  Mat prob;                    // selector x leaf
  Vec wealth;                  // node id -> wealth under the current partial assignment
  Mat holdings;                // per decision index
  std::size_t count = 0;
  bool warned = false;
  double best_value = kValueFloor;
  Mat best_holdings;

  void run(std::size_t depth);
  double evaluate() const;
};

double Search::evaluate() const {
  Vec util(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    NodeId n = leaves[i];
    util[i] = evaluate_utility(*utility, wealth[n], tree->nodes[n].endowment);
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const Vec& p : prob) {
    double acc = 0.0;
    for (std::size_t i = 0; i < util.size(); ++i) {
      if (p[i] <= 0.0) continue;
      if (is_floor(util[i])) { acc = kValueFloor; break; }
      acc += p[i] * util[i];
    }
    worst = std::min(worst, acc);
  }
  return worst;
}

void Search::run(std::size_t depth) {
  if (depth == decisions.size()) {
    if (++count > spec.strategy_cap) {
      throw cap_error("grid search exceeded the strategy cap of " +
                      std::to_string(spec.strategy_cap));
    }
    double v = evaluate();
    if (v > best_value) {
      best_value = v;
      best_holdings = holdings;
    }
    return;
  }

  const NodeMoves& m = moves[depth];
  const double w = wealth[m.node];
  const double step = spec.step;
  const int d = tree->asset_count;

  // Lattice span. One dimension gets the exact feasible interval; otherwise
  // a box from the sampled margin, or the configured fallback radius.
  long lo[3] = {0, 0, 0};
  long hi[3] = {0, 0, 0};
  bool box_capped = false;
  double fallback = spec.box_radius > 0.0 ? spec.box_radius : 8.0 * (w + 1.0);
  if (d == 1) {
    double hlo = -std::numeric_limits<double>::infinity();
    double hhi = std::numeric_limits<double>::infinity();
    for (const Vec& v : m.deltas) {
      if (v[0] > 0.0) hlo = std::max(hlo, -w / v[0]);
      if (v[0] < 0.0) hhi = std::min(hhi, w / (-v[0]));
    }
    if (!std::isfinite(hlo)) { hlo = -fallback; box_capped = true; }
    if (!std::isfinite(hhi)) { hhi = fallback; box_capped = true; }
    lo[0] = static_cast<long>(std::ceil(hlo / step - 1e-9));
    hi[0] = static_cast<long>(std::floor(hhi / step + 1e-9));
  } else {
    double radius;
    if (margins[depth] > 0.0) {
      radius = 1.25 * w / margins[depth] + 2.0 * step;
    } else {
      radius = fallback;
      box_capped = true;
    }
    long span = static_cast<long>(std::floor(radius / step)) + 1;
    for (int a = 0; a < d; ++a) { lo[a] = -span; hi[a] = span; }
  }

  Vec h(d, 0.0);
  long idx[3] = {lo[0], d > 1 ? lo[1] : 0, d > 2 ? lo[2] : 0};
  for (;;) {
    for (int a = 0; a < d; ++a) h[a] = idx[a] * step;
    bool feasible = true;
    for (const Vec& v : m.deltas) {
      if (w + dot(h, v) < -kWealthTol * (1.0 + std::abs(w))) { feasible = false; break; }
    }
    if (feasible) {
      if (box_capped) {
        for (int a = 0; a < d; ++a) {
          if (idx[a] == lo[a] || idx[a] == hi[a]) warned = true;
        }
      }
      holdings[depth] = h;
      for (std::size_t c = 0; c < m.children.size(); ++c) {
        wealth[m.children[c]] = w + dot(h, m.deltas[c]);
      }
      run(depth + 1);
    }
    int a = d - 1;
    while (a >= 0 && ++idx[a] > hi[a]) { idx[a] = lo[a]; --a; }
    if (a < 0) break;
  }
}

}  // namespace

std::vector<NodeId> terminals(const ScenarioTree& tree) {
  std::vector<char> nonpolar = nonpolar_mask(tree);
  std::vector<NodeId> out;
  for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
    if (nonpolar[n] && tree.is_terminal(n)) out.push_back(n);
  }
  return out;
}

std::vector<SelectorProduct> enumerate_selectors(const ScenarioTree& tree, std::size_t cap) {
  std::vector<char> nonpolar = nonpolar_mask(tree);
  std::vector<NodeId> decisions = decision_nodes(tree, nonpolar);
  std::vector<NodeId> leaves = terminals(tree);

  double total = 1.0;
  for (NodeId n : decisions) {
    total *= static_cast<double>(tree.nodes[n].measures.count());
    if (total > static_cast<double>(cap)) {
      throw cap_error("selector product count exceeds the cap of " + std::to_string(cap));
    }
  }

  std::vector<int> radix(decisions.size());
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    radix[i] = static_cast<int>(tree.nodes[decisions[i]].measures.count());
  }

  std::vector<SelectorProduct> out;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<int> digit(decisions.size(), 0);
  Vec node_prob(tree.nodes.size(), 0.0);
  for (;;) {
    SelectorProduct sp;
    sp.choice.assign(tree.nodes.size(), -1);
    for (std::size_t i = 0; i < decisions.size(); ++i) sp.choice[decisions[i]] = digit[i];

    std::fill(node_prob.begin(), node_prob.end(), 0.0);
    node_prob[tree.root] = 1.0;
    for (NodeId n : decisions) {
      const Node& node = tree.nodes[n];
      const Vec& p = node.measures.extremes[static_cast<std::size_t>(sp.choice[n])];
      for (std::size_t c = 0; c < node.children.size(); ++c) {
        node_prob[node.children[c]] = node_prob[n] * p[c];
      }
    }
    sp.terminal_prob.resize(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) sp.terminal_prob[i] = node_prob[leaves[i]];
    out.push_back(std::move(sp));

    std::size_t i = decisions.size();
    while (i > 0 && ++digit[i - 1] == radix[i - 1]) digit[--i] = 0;
    if (i == 0) break;
  }
  return out;
}

WorstCase worst_case_expected_utility(const ScenarioTree& tree, const Strategy& strategy,
                                      const UtilitySpec& utility, double x0,
                                      std::size_t selector_cap) {
  std::vector<char> nonpolar = nonpolar_mask(tree);
  std::vector<NodeId> decisions = decision_nodes(tree, nonpolar);
  std::vector<NodeId> leaves = terminals(tree);

  Vec wealth(tree.nodes.size(), 0.0);
  wealth[tree.root] = x0;
  WorstCase out;
  if (x0 < -kWealthTol) {
    out.violation = path_to(tree, tree.root);
    return out;
  }
  for (NodeId n : decisions) {
    const Vec* h = strategy.at(n);
    const Node& node = tree.nodes[n];
    for (NodeId c : node.children) {
      if (!nonpolar[c]) continue;
      double gain = 0.0;
      if (h != nullptr) {
        for (int a = 0; a < tree.asset_count; ++a) {
          gain += (*h)[a] * (tree.price(c)[a] - tree.price(n)[a]);
        }
      }
      wealth[c] = wealth[n] + gain;
      if (wealth[c] < -kWealthTol * (1.0 + std::abs(wealth[n]))) {
        out.violation = path_to(tree, c);
        return out;
      }
    }
  }

  std::vector<SelectorProduct> sels = enumerate_selectors(tree, selector_cap);
  Vec util(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    NodeId n = leaves[i];
    util[i] = evaluate_utility(utility, wealth[n], tree.nodes[n].endowment);
  }
  for (std::size_t s = 0; s < sels.size(); ++s) {
    double acc = 0.0;
    bool floored = false;
    for (std::size_t i = 0; i < util.size(); ++i) {
      double p = sels[s].terminal_prob[i];
      if (p <= 0.0) continue;
      if (is_floor(util[i])) { floored = true; break; }
      acc += p * util[i];
    }
    double v = floored ? kValueFloor : acc;
    if (out.selector < 0 || v < out.value) {
      out.value = v;
      out.selector = static_cast<int>(s);
    }
  }
  return out;
}

BruteForce brute_force_value(const ScenarioTree& tree, const UtilitySpec& utility, double x0,
                             const GridSpec& grid) {
  if (!(grid.step > 0.0)) throw input_error("grid step must be positive");
  if (x0 < 0.0) throw input_error("grid search requires nonnegative initial capital");

  std::vector<char> nonpolar = nonpolar_mask(tree);

  Search s;
  s.tree = &tree;
  s.utility = &utility;
  s.spec = grid;
  s.decisions = decision_nodes(tree, nonpolar);
  s.leaves = terminals(tree);
  for (NodeId n : s.decisions) s.moves.push_back(moves_of(tree, n, nonpolar));
  s.margins.resize(s.decisions.size(), 0.0);
  for (std::size_t i = 0; i < s.moves.size(); ++i) {
    if (tree.asset_count > 1) s.margins[i] = sampled_margin(s.moves[i], tree.asset_count);
  }

  std::vector<SelectorProduct> sels = enumerate_selectors(tree, grid.selector_cap);
  s.prob.reserve(sels.size());
  for (const SelectorProduct& sp : sels) s.prob.push_back(sp.terminal_prob);

  s.wealth.assign(tree.nodes.size(), 0.0);
  s.wealth[tree.root] = x0;
  s.holdings.assign(s.decisions.size(), Vec(tree.asset_count, 0.0));
  s.run(0);

  BruteForce out;
  out.value = s.best_value;
  out.bounded_warning = s.warned;
  out.strategies = s.count;
  if (!s.best_holdings.empty()) {
    out.best.holdings.assign(tree.nodes.size(), Vec());
    for (std::size_t i = 0; i < s.decisions.size(); ++i) {
      out.best.holdings[s.decisions[i]] = s.best_holdings[i];
    }
  }
  return out;
}

}  // namespace rum::oracle
