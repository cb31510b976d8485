#include "rum/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rum/parallel.hpp"

namespace rum {

namespace {

struct NodeWork {
  NodeId node = -1;
  na::SupportData support;
  OnePeriodProblem problem;
  double eps = 0.0;
};

OnePeriodProblem make_problem(const ScenarioTree& tree, const UtilitySpec& utility,
                              const na::SupportData& support, const ValueField& field) {
  OnePeriodProblem p;
  p.support = &support;
  p.measures = &tree.nodes[support.node].measures;
  p.capital = 0.0;
  p.continuations.reserve(support.children.size());
  for (NodeId c : support.children) {
    Continuation cont;
    if (tree.is_terminal(c)) {
      cont.utility = &utility;
      cont.endowment = tree.nodes[c].endowment;
    } else {
      cont.plf = &field.value[c].value();
    }
    p.continuations.push_back(cont);
  }
  return p;
}

std::string node_label(const ScenarioTree& tree, NodeId n) {
  const std::string& name = tree.nodes[n].name;
  return name.empty() ? std::to_string(n) : name;
}

}  // namespace

double ValueField::value_at(NodeId n, double wealth) const {
  if (tree->is_terminal(n)) return evaluate_utility(*utility, wealth, tree->nodes[n].endowment);
  if (!value[n].has_value())
    throw std::invalid_argument("value_at: node carries no stored value function");
  return value[n]->eval(wealth);
}

ValueField backward_induction(const ScenarioTree& tree, const UtilitySpec& utility,
                              const WealthGridSpec& grid, double tol) {
  if (grid.knots < 2) throw input_error("backward_induction: need at least 2 grid knots");
  if (!(grid.x0 > 0.0)) throw input_error("backward_induction: base capital must be positive");
  if (!(grid.floor_factor > 0.0) || !(grid.floor_factor < 1.0))
    throw input_error("backward_induction: floor factor must lie in (0, 1)");
  if (!utility.bounded_above() && !grid.allow_unbounded)
    throw input_error(
        "backward_induction: utility is unbounded above; set allow_unbounded to proceed");

  ValueField field;
  field.tree = &tree;
  field.utility = &utility;
  field.x0 = grid.x0;
  field.nonpolar = nonpolar_mask(tree);
  field.value.assign(tree.nodes.size(), std::nullopt);
  field.slice_eps.assign(std::max(tree.horizon, 0), 0.0);

  auto na_results = na::check_tree(tree);
  {
    std::vector<NodeId> bad;
    for (const auto& [n, r] : na_results)
      if (!r.holds) bad.push_back(n);
    if (!bad.empty()) {
      std::ostringstream msg;
      msg << "backward_induction: arbitrage at node(s)";
      for (NodeId n : bad) msg << ' ' << node_label(tree, n);
      throw arbitrage_error(msg.str());
    }
  }

  // Supports, margins and the wealth cap before any solve.
  auto slices = nodes_by_time(tree);
  std::vector<std::vector<NodeWork>> work(std::max(tree.horizon, 0));
  double bound_multiplier = 1.0;
  for (int t = 0; t < tree.horizon; ++t) {
    double worst_ratio = 0.0;
    for (NodeId n : slices[t]) {
      if (!field.nonpolar[n] || tree.is_terminal(n)) continue;
      NodeWork w;
      w.node = n;
      w.support = na::compute_support(tree, n);
      double margin = na::nondegeneracy_margin(w.support);
      field.margins[n] = margin;
      if (std::isfinite(margin) && margin > 0.0)
        worst_ratio = std::max(worst_ratio, w.support.scale / margin);
      work[t].push_back(std::move(w));
    }
    bound_multiplier *= 1.0 + worst_ratio;
  }
  field.wealth_bound =
      grid.x0 * (grid.cap_multiplier > 0.0 ? grid.cap_multiplier : bound_multiplier);

  const int K = grid.knots;
  Vec knots(K);
  const double lo = grid.x0 * grid.floor_factor;
  const double hi = std::max(field.wealth_bound, lo * (1.0 + 1e-9));
  for (int i = 0; i < K; ++i)
    knots[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (K - 1));

  const int probes = std::max(grid.probes_per_node, 0);

  for (int t = tree.horizon - 1; t >= 0; --t) {
    auto& slice = work[t];
    // continuations point into field.value, filled by the previous slice
    for (NodeWork& w : slice) w.problem = make_problem(tree, utility, w.support, field);

    parallel_for(slice.size(), [&](std::size_t wi) {
      NodeWork& w = slice[wi];
      Vec values(K);
      Vec warm;
      for (int i = 0; i < K; ++i) {
        OnePeriodProblem p = w.problem;
        p.capital = knots[i];
        MaxminSolution sol =
            solve_one_period(p, tol, 10000, true, warm.empty() ? nullptr : &warm);
        if (is_floor(sol.value)) {
          std::ostringstream msg;
          msg << "backward_induction: value is -infinity at node " << node_label(tree, w.node)
              << " for grid wealth " << knots[i]
              << " (endowments push the effective domain above the grid floor)";
          throw numerical_error(msg.str());
        }
        values[i] = sol.value;
        warm = sol.h;
      }
      double repair = 0.0;
      ConcavePLF fitted = ConcavePLF::fit(knots, values, &repair);

      double defect = 0.0;
      for (int q = 0; q < probes; ++q) {
        int seg = static_cast<int>((static_cast<long>(q) + 1) * (K - 1) / (probes + 1));
        seg = std::min(seg, K - 2);
        double xm = std::sqrt(knots[seg] * knots[seg + 1]);
        OnePeriodProblem p = w.problem;
        p.capital = xm;
        MaxminSolution sol = solve_one_period(p, tol, 10000, true);
        defect = std::max(defect, std::fabs(sol.value - fitted.eval(xm)));
      }
      w.eps = repair + defect + tol;
      field.value[w.node] = std::move(fitted);
    });

    double slice_eps = 0.0;
    for (const NodeWork& w : slice) slice_eps = std::max(slice_eps, w.eps);
    field.slice_eps[t] = slice_eps;
  }

  field.eps_grid = 0.0;
  for (double e : field.slice_eps) field.eps_grid += e;
  return field;
}

namespace {

// Exact worst case over extreme-selector products of the given slice values,
// folded back to the root one node at a time (the minimum factorizes because
// each selector enters the expectation linearly).
double fold_worst_case(const ScenarioTree& tree, const ValueField& field,
                       const std::map<NodeId, double>& slice_values, int t) {
  std::map<NodeId, double> val = slice_values;
  auto slices = nodes_by_time(tree);
  for (int s = t - 1; s >= 0; --s) {
    for (NodeId n : slices[s]) {
      if (!field.nonpolar[n] || tree.is_terminal(n)) continue;
      const Node& node = tree.nodes[n];
      double worst = std::numeric_limits<double>::infinity();
      for (const Vec& prob : node.measures.extremes) {
        double acc = 0.0;
        bool floored = false;
        for (std::size_t slot = 0; slot < node.children.size(); ++slot) {
          double pr = prob[slot];
          if (pr <= 0.0) continue;
          double cv = val.at(node.children[slot]);
          if (is_floor(cv)) {
            floored = true;
            break;
          }
          acc += pr * cv;
        }
        double v = floored ? kValueFloor : acc;
        worst = std::min(worst, v);
      }
      val[n] = worst;
    }
  }
  return val.at(tree.root);
}

// Wealth at every non-polar node under the strategy.
std::map<NodeId, double> forward_wealth(const ScenarioTree& tree, const ValueField& field,
                                        const Strategy& strategy, double x0) {
  std::map<NodeId, double> wealth;
  wealth[tree.root] = x0;
  auto slices = nodes_by_time(tree);
  for (int t = 0; t < tree.horizon; ++t) {
    for (NodeId n : slices[t]) {
      if (!field.nonpolar[n] || tree.is_terminal(n)) continue;
      double w = wealth.at(n);
      const Vec* h = strategy.at(n);
      for (NodeId c : tree.nodes[n].children) {
        if (!field.nonpolar[c]) continue;
        double gain = 0.0;
        if (h)
          for (int a = 0; a < tree.asset_count; ++a)
            gain += (*h)[a] * (tree.nodes[c].price[a] - tree.nodes[n].price[a]);
        wealth[c] = w + gain;
      }
    }
  }
  return wealth;
}

}  // namespace

ExtractResult extract_strategy(const ScenarioTree& tree, const ValueField& field, double x0,
                               double tol) {
  if (field.tree != &tree)
    throw std::invalid_argument("extract_strategy: field belongs to a different tree");
  if (!(x0 >= 0.0)) throw std::invalid_argument("extract_strategy: negative capital");

  ExtractResult result;
  result.strategy.holdings.assign(tree.nodes.size(), Vec{});
  result.max_wealth = x0;

  std::map<NodeId, double> wealth;
  wealth[tree.root] = x0;
  auto slices = nodes_by_time(tree);
  for (int t = 0; t < tree.horizon; ++t) {
    for (NodeId n : slices[t]) {
      if (!field.nonpolar[n] || tree.is_terminal(n)) continue;
      double w = wealth.at(n);
      if (w < -1e-9)
        throw numerical_error("extract_strategy: negative wealth along the extraction");
      w = std::max(w, 0.0);

      na::SupportData support = na::compute_support(tree, n);
      OnePeriodProblem p = make_problem(tree, *field.utility, support, field);
      p.capital = w;
      MaxminSolution sol = solve_one_period(p, tol, 10000, true);
      result.strategy.holdings[n] = sol.h;

      for (NodeId c : tree.nodes[n].children) {
        if (!field.nonpolar[c]) continue;
        double gain = 0.0;
        for (int a = 0; a < tree.asset_count; ++a)
          gain += sol.h[a] * (tree.nodes[c].price[a] - tree.nodes[n].price[a]);
        wealth[c] = w + gain;
        result.max_wealth = std::max(result.max_wealth, wealth[c]);
      }
    }
  }

  // Certified value: exact selector worst case of the terminal utilities.
  std::map<NodeId, double> terminal;
  for (const auto& [n, w] : wealth)
    if (tree.is_terminal(n))
      terminal[n] = evaluate_utility(*field.utility, w, tree.nodes[n].endowment);
  result.value = fold_worst_case(tree, field, terminal, tree.horizon);
  return result;
}

InequalityReport verify_value_inequalities(const ScenarioTree& tree, const ValueField& field,
                                           const Strategy& strategy, double x0) {
  if (field.tree != &tree)
    throw std::invalid_argument("verify_value_inequalities: field belongs to a different tree");

  auto wealth = forward_wealth(tree, field, strategy, x0);
  auto slices = nodes_by_time(tree);

  InequalityReport report;
  report.eps = field.eps_grid;
  report.chain.resize(tree.horizon + 1);
  for (int t = 0; t <= tree.horizon; ++t) {
    std::map<NodeId, double> vals;
    for (NodeId n : slices[t]) {
      if (!field.nonpolar[n]) continue;
      vals[n] = field.value_at(n, wealth.at(n));
    }
    report.chain[t] = fold_worst_case(tree, field, vals, t);
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int t = 0; t + 1 <= tree.horizon; ++t) {
    double slack = field.eps_grid + 1e-9 * (1.0 + std::fabs(report.chain[t]));
    if (report.chain[t + 1] > report.chain[t] + slack) report.nonincreasing = false;
  }
  for (double c : report.chain)
    if (!is_floor(c)) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  report.spread = (hi >= lo) ? hi - lo : 0.0;
  report.terminal_minus_root = report.chain.back() - report.chain.front();
  return report;
}

}  // namespace rum
