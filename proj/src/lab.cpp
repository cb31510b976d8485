#include "rum/lab.hpp"

#include <cmath>
#include <random>
#include <string>

#include "rum/errors.hpp"
#include "rum/na.hpp"
#include "rum/parallel.hpp"

namespace rum::lab {
namespace {

// Probabilities of the heavy-tail atoms 2^{2n}, n = 1..level: geometric
// weights 2^{-n-1} with the cut tail folded onto the last atom, so the
// positive part carries mass 1/2 exactly (all weights are dyadic).
Vec tail_probabilities(int level) {
  Vec p(level);
  for (int n = 1; n < level; ++n) p[n - 1] = std::ldexp(1.0, -n - 1);
  p[level - 1] = std::ldexp(1.0, -level);
  return p;
}

ScenarioTree one_period_skeleton(int asset_count, std::size_t children) {
  ScenarioTree tree;
  tree.horizon = 1;
  tree.asset_count = asset_count;
  tree.root = 0;
  tree.nodes.resize(1 + children);
  tree.nodes[0].name = "root";
  tree.nodes[0].time = 0;
  for (std::size_t c = 0; c < children; ++c) {
    NodeId id = static_cast<NodeId>(1 + c);
    tree.nodes[0].children.push_back(id);
    tree.nodes[id].parent = 0;
    tree.nodes[id].time = 1;
    tree.nodes[id].name = "w" + std::to_string(c);
  }
  return tree;
}

// One-period problem at the root with terminal-utility continuations. The
// problem holds a pointer to the support, so both live here; initialized in
// place because the pointer must not outlive a move.
struct RootProblem {
  na::SupportData support;
  OnePeriodProblem problem;

  RootProblem(const ScenarioTree& tree, const UtilitySpec& utility, double x)
      : support(na::compute_support(tree, tree.root)) {
    problem.support = &support;
    problem.measures = &tree.nodes[tree.root].measures;
    problem.capital = x;
    for (NodeId c : support.children) {
      Continuation k;
      k.utility = &utility;
      k.endowment = tree.nodes[c].endowment;
      problem.continuations.push_back(k);
    }
  }
  RootProblem(const RootProblem&) = delete;
  RootProblem& operator=(const RootProblem&) = delete;
};

// Optimizer of the bounded-asset subproblem: max over g of E[U(x + g dS2)]
// under the first extreme alone (dS2 = -1 or +2, equally likely).
double bounded_leg_optimizer(const UtilitySpec& utility, double x, double tol) {
  ScenarioTree aux = one_period_skeleton(1, 2);
  aux.nodes[0].price = {1.0};
  aux.nodes[1].price = {0.0};
  aux.nodes[2].price = {3.0};
  aux.nodes[0].measures.extremes = {{0.5, 0.5}};
  RootProblem rp(aux, utility, x);
  return solve_one_period(rp.problem, tol).h[0];
}

}  // namespace

ScenarioTree build_truncated_example(int level, const UtilitySpec& utility) {
  if (level < 1) throw input_error("truncation level must be at least 1");
  if (utility.bounded_above()) {
    throw input_error("the heavy tail construction needs a utility unbounded from above");
  }

  const std::size_t children = 5 + static_cast<std::size_t>(level);
  ScenarioTree tree = one_period_skeleton(2, children);
  tree.nodes[0].price = {1.0, 1.0};
  const double moves[5][2] = {{1, -1}, {-1, -1}, {1, 2}, {-1, 2}, {-1, 0}};
  for (int c = 0; c < 5; ++c) {
    tree.nodes[1 + c].price = {1.0 + moves[c][0], 1.0 + moves[c][1]};
  }
  for (int n = 1; n <= level; ++n) {
    tree.nodes[5 + n].price = {1.0 + std::ldexp(1.0, 2 * n), 1.0};
  }

  Vec p1(children, 0.0), p2(children, 0.0);
  p1[0] = p1[1] = p1[2] = p1[3] = 0.25;
  p2[4] = 0.5;
  Vec tail = tail_probabilities(level);
  for (int n = 0; n < level; ++n) p2[5 + n] = tail[n];
  tree.nodes[0].measures.extremes = {p1, p2};
  return tree;
}

TruncationStudy run_nonexistence_study(const std::vector<int>& levels,
                                       const UtilitySpec& utility, double x, double tol) {
  if (!(x > 0.0)) throw input_error("the study needs positive initial capital");
  if (utility.bounded_above()) {
    throw input_error("the heavy tail construction needs a utility unbounded from above");
  }

  TruncationStudy study;
  study.g2 = bounded_leg_optimizer(utility, x, tol);
  study.rows.resize(levels.size());
  parallel_for(levels.size(), [&](std::size_t i) {
    ScenarioTree tree = build_truncated_example(levels[i], utility);
    RootProblem rp(tree, utility, x);
    MaxminSolution sol = solve_one_period(rp.problem, tol);
    TruncationRow& row = study.rows[i];
    row.level = levels[i];
    row.h1 = sol.h[0];
    row.h2 = sol.h[1];
    row.value = sol.value;
    row.value_at_limit = robust_objective(rp.problem, {0.0, study.g2}).value;
    row.gap = row.value - row.value_at_limit;
  });
  return study;
}

TruncationStudy random_utility_variant(const std::vector<int>& levels, double x, double tol) {
  if (!(x > 0.0)) throw input_error("the study needs positive initial capital");
  UtilitySpec base = UtilitySpec::power(0.5);
  double g2 = bounded_leg_optimizer(base, x, tol);

  UtilitySpec shifted = UtilitySpec::power(0.5);
  shifted.enable_endowment(true);

  TruncationStudy study;
  study.g2 = g2;
  study.rows.resize(levels.size());
  parallel_for(levels.size(), [&](std::size_t i) {
    int level = levels[i];
    if (level < 1) throw input_error("truncation level must be at least 1");
    const std::size_t children = 5 + static_cast<std::size_t>(level);
    ScenarioTree tree = one_period_skeleton(1, children);
    tree.nodes[0].price = {1.0};
    const double moves[5][2] = {{1, -1}, {-1, -1}, {1, 2}, {-1, 2}, {-1, 0}};
    for (int c = 0; c < 5; ++c) {
      tree.nodes[1 + c].price = {1.0 + moves[c][0]};
      tree.nodes[1 + c].endowment = g2 * moves[c][1];
    }
    for (int n = 1; n <= level; ++n) {
      tree.nodes[5 + n].price = {1.0 + std::ldexp(1.0, 2 * n)};
    }
    Vec p1(children, 0.0), p2(children, 0.0);
    p1[0] = p1[1] = p1[2] = p1[3] = 0.25;
    p2[4] = 0.5;
    Vec tail = tail_probabilities(level);
    for (int n = 0; n < level; ++n) p2[5 + n] = tail[n];
    tree.nodes[0].measures.extremes = {p1, p2};

    RootProblem rp(tree, shifted, x);
    MaxminSolution sol = solve_one_period(rp.problem, tol);
    TruncationRow& row = study.rows[i];
    row.level = level;
    row.h1 = sol.h[0];
    row.h2 = g2;
    row.value = sol.value;
    row.value_at_limit = robust_objective(rp.problem, {0.0}).value;
    row.gap = row.value - row.value_at_limit;
  });
  return study;
}

ExistenceReport one_dim_existence_demo(std::uint64_t seed, int instances, double tol,
                                       double step) {
  if (instances < 1) throw input_error("the demo needs at least one instance");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> child_count(2, 4);
  std::uniform_int_distribution<int> extreme_count(1, 3);
  std::uniform_real_distribution<double> atom(-1.0, 3.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  UtilitySpec utility = UtilitySpec::power(0.5);
  ExistenceReport report;
  const int draw_cap = 200 * instances;
  int draws = 0;
  while (report.instances < instances) {
    if (++draws > draw_cap) {
      throw numerical_error("instance generation kept failing the acceptance filters");
    }
    int m = child_count(rng);
    ScenarioTree tree = one_period_skeleton(1, static_cast<std::size_t>(m));
    tree.nodes[0].price = {1.0};
    for (int c = 0; c < m; ++c) tree.nodes[1 + c].price = {1.0 + atom(rng)};

    int k = extreme_count(rng);
    Mat extremes;
    for (int e = 0; e < k; ++e) {
      Vec w(m, 0.0);
      double sum = 0.0;
      for (int c = 0; c < m; ++c) {
        if (unit(rng) < 0.15) continue;  // exact zero: the child may become polar
        w[c] = 0.05 + unit(rng);
        sum += w[c];
      }
      if (sum == 0.0) { w[0] = 1.0; sum = 1.0; }
      for (int c = 0; c < m; ++c) w[c] /= sum;
      extremes.push_back(std::move(w));
    }
    tree.nodes[0].measures.extremes = std::move(extremes);

    na::SupportData support = na::compute_support(tree, tree.root);
    if (support.vectors.empty()) continue;
    if (!na::check_node(support).holds) {
      ++report.rejected_by_na;
      continue;
    }
    if (na::nondegeneracy_margin(support) < 0.05) {
      ++report.rejected_degenerate;
      continue;
    }

    RootProblem rp(tree, utility, 1.0);
    MaxminSolution sol = solve_one_period(rp.problem, tol);
    double lattice = grid_search_value(rp.problem, step);
    double shortfall = lattice - sol.value;
    ++report.instances;
    if (shortfall <= tol + 1e-12) ++report.attained;
    report.worst_shortfall = std::max(report.worst_shortfall, shortfall);
  }
  return report;
}

}  // namespace rum::lab
