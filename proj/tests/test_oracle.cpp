#include "doctest.h"

#include <cmath>

#include "rum/errors.hpp"
#include "rum/maxmin.hpp"
#include "rum/oracle.hpp"
#include "support/support.hpp"

using namespace rum;
using testsupport::one_period_tree;
using testsupport::phi_market;

namespace {

ScenarioTree two_period_two_extremes() {
  // two periods, two extremes at the root, one or two at the middle nodes
  ScenarioTree tree;
  tree.horizon = 2;
  tree.asset_count = 1;
  tree.nodes.resize(7);
  auto setup = [&](NodeId id, NodeId parent, int time, double price) {
    tree.nodes[id].parent = parent;
    tree.nodes[id].time = time;
    tree.nodes[id].price = {price};
    if (parent >= 0) tree.nodes[parent].children.push_back(id);
  };
  setup(0, -1, 0, 4.0);
  setup(1, 0, 1, 3.0);
  setup(2, 0, 1, 5.0);
  setup(3, 1, 2, 2.0);
  setup(4, 1, 2, 3.5);
  setup(5, 2, 2, 4.0);
  setup(6, 2, 2, 6.0);
  tree.nodes[0].measures.extremes = {{0.5, 0.5}, {0.75, 0.25}};
  tree.nodes[1].measures.extremes = {{0.5, 0.5}, {0.25, 0.75}};
  tree.nodes[2].measures.extremes = {{0.5, 0.5}};
  return tree;
}

}  // namespace

TEST_CASE("selector enumeration covers the product space") {
  ScenarioTree tree = two_period_two_extremes();
  auto sel = oracle::enumerate_selectors(tree);
  CHECK(sel.size() == 4);  // 2 * 2 * 1 combinations
  auto leaves = oracle::terminals(tree);
  CHECK(leaves == std::vector<NodeId>{3, 4, 5, 6});
  for (const auto& s : sel) {
    double sum = 0.0;
    for (double p : s.terminal_prob) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(s.choice[0] >= 0);
    CHECK(s.choice[3] == -1);  // terminals choose nothing
  }
  // specific product: root extreme 1 (0.75/0.25), middle extreme 1 (0.25/0.75)
  bool found = false;
  for (const auto& s : sel) {
    if (s.choice[0] == 1 && s.choice[1] == 1 && s.choice[2] == 0) {
      found = true;
      CHECK(s.terminal_prob[0] == doctest::Approx(0.75 * 0.25));
      CHECK(s.terminal_prob[1] == doctest::Approx(0.75 * 0.75));
      CHECK(s.terminal_prob[2] == doctest::Approx(0.25 * 0.5));
      CHECK(s.terminal_prob[3] == doctest::Approx(0.25 * 0.5));
    }
  }
  CHECK(found);
}

TEST_CASE("single-extreme trees yield exactly one selector") {
  ScenarioTree tree = one_period_tree(1, {{0.5}, {2.0}}, {1.0}, {{0.5, 0.5}});
  auto sel = oracle::enumerate_selectors(tree);
  REQUIRE(sel.size() == 1);
  CHECK(sel[0].terminal_prob == Vec{0.5, 0.5});
}

TEST_CASE("selector cap fails loudly") {
  ScenarioTree tree = two_period_two_extremes();  // 4 selector products
  CHECK_THROWS_AS(oracle::enumerate_selectors(tree, 2), cap_error);
  CHECK_NOTHROW(oracle::enumerate_selectors(tree, 4));
}

TEST_CASE("doing nothing earns the capital utility under every model") {
  ScenarioTree tree = phi_market();
  Strategy zero;
  zero.holdings.assign(tree.nodes.size(), Vec());
  UtilitySpec u = UtilitySpec::log_utility();
  auto wc = oracle::worst_case_expected_utility(tree, zero, u, 1.0);
  CHECK(wc.value == doctest::Approx(0.0));
  CHECK(wc.selector == 0);  // tie: lowest index wins
  CHECK_FALSE(wc.violation.has_value());
}

TEST_CASE("worst case picks the pessimistic mix") {
  ScenarioTree tree = phi_market();
  Strategy half;
  half.holdings.assign(tree.nodes.size(), Vec());
  half.holdings[0] = {0.5};
  UtilitySpec u = UtilitySpec::log_utility();
  auto wc = oracle::worst_case_expected_utility(tree, half, u, 1.0);
  CHECK(wc.value == doctest::Approx(0.6 * std::log(0.5) + 0.4 * std::log(1.5)));
  CHECK(wc.selector == 1);
}

TEST_CASE("inadmissible strategies floor with a root-anchored violation path") {
  ScenarioTree tree = phi_market();
  Strategy reckless;
  reckless.holdings.assign(tree.nodes.size(), Vec());
  reckless.holdings[0] = {2.0};  // down branch wealth: 1 - 2 = -1
  UtilitySpec u = UtilitySpec::log_utility();
  auto wc = oracle::worst_case_expected_utility(tree, reckless, u, 1.0);
  CHECK(is_floor(wc.value));
  REQUIRE(wc.violation.has_value());
  CHECK(wc.violation->front() == 0);
  CHECK(wc.violation->back() == 1);  // the crashed child
}

TEST_CASE("fixed-strategy worst case matches greedy backward minimization") {
  // the selector minimum factorizes node by node, so full enumeration and the
  // greedy recursion must agree on every strategy
  testsupport::Rng rng(555);
  testsupport::TreeConfig cfg;
  cfg.horizon = 2;
  UtilitySpec u = UtilitySpec::power(0.5);
  int tested = 0;
  while (tested < 10) {
    ScenarioTree tree = testsupport::random_tree(rng, cfg);
    Strategy s = testsupport::random_admissible_strategy(rng, tree, 1.5);
    auto wc = oracle::worst_case_expected_utility(tree, s, u, 1.5);
    double greedy = testsupport::greedy_worst_case(tree, s, u, 1.5);
    if (is_floor(wc.value)) {
      CHECK(is_floor(greedy));
    } else {
      CHECK(wc.value == doctest::Approx(greedy).epsilon(1e-10));
    }
    ++tested;
  }
}

TEST_CASE("one-period brute force approaches the certified solver value") {
  ScenarioTree tree = phi_market();
  UtilitySpec u = UtilitySpec::log_utility();

  auto support = na::compute_support(tree, 0);
  OnePeriodProblem p;
  p.support = &support;
  p.measures = &tree.nodes[0].measures;
  p.capital = 1.0;
  for (NodeId c : support.children) {
    Continuation k;
    k.utility = &u;
    k.endowment = tree.nodes[c].endowment;
    p.continuations.push_back(k);
  }
  MaxminSolution sol = solve_one_period(p, 1e-10);

  oracle::GridSpec grid;
  grid.step = 0.015625;
  auto bf = oracle::brute_force_value(tree, u, 1.0, grid);
  CHECK(bf.value <= sol.value + 1e-9);          // lattice never beats the solver
  CHECK(bf.value >= sol.value - 2.0 * grid.step);  // and lands within a step's curvature
  CHECK(bf.strategies > 0);
  CHECK_FALSE(bf.bounded_warning);
}

TEST_CASE("brute force respects the strategy cap") {
  testsupport::Rng rng(8);
  testsupport::TreeConfig cfg;
  cfg.horizon = 2;
  cfg.min_children = 3;
  cfg.max_children = 3;
  ScenarioTree tree = testsupport::random_tree(rng, cfg);
  oracle::GridSpec grid;
  grid.step = 0.03125;
  grid.strategy_cap = 50;
  CHECK_THROWS_AS(oracle::brute_force_value(tree, UtilitySpec::power(0.5), 1.0, grid), cap_error);
}

TEST_CASE("arbitrage markets escalate with the search box") {
  // under arbitrage the value grows with the box instead of stabilizing
  ScenarioTree tree = one_period_tree(1, {{1.25}, {1.5}}, {1.0}, {{0.5, 0.5}});
  UtilitySpec u = UtilitySpec::power(0.5);
  oracle::GridSpec narrow;
  narrow.step = 0.25;
  narrow.box_radius = 2.0;
  oracle::GridSpec wide = narrow;
  wide.box_radius = 16.0;
  auto lo = oracle::brute_force_value(tree, u, 1.0, narrow);
  auto hi = oracle::brute_force_value(tree, u, 1.0, wide);
  CHECK(hi.value > lo.value + 0.1);
  CHECK(lo.bounded_warning);
  CHECK(hi.bounded_warning);
}

TEST_CASE("no boundary warning on a healthy market") {
  ScenarioTree tree = two_period_two_extremes();
  UtilitySpec u = UtilitySpec::exponential(1.0);
  oracle::GridSpec grid;
  grid.step = 0.25;
  auto bf = oracle::brute_force_value(tree, u, 1.0, grid);
  CHECK_FALSE(bf.bounded_warning);
  CHECK(bf.value > kValueFloor / 2);
  // replaying the winning strategy reproduces the value exactly
  auto replay = oracle::worst_case_expected_utility(tree, bf.best, u, 1.0);
  CHECK(replay.value == doctest::Approx(bf.value).epsilon(1e-12));
}

TEST_CASE("multi-period brute force is consistent with per-node solves") {
  // two periods, single extreme everywhere: dynamic programming by hand with
  // the exact solver at the three decision nodes, then compare brute force
  ScenarioTree tree = two_period_two_extremes();
  tree.nodes[0].measures.extremes = {{0.5, 0.5}};
  tree.nodes[1].measures.extremes = {{0.5, 0.5}};
  UtilitySpec u = UtilitySpec::exponential(1.0);

  oracle::GridSpec grid;
  grid.step = 0.0625;
  auto bf = oracle::brute_force_value(tree, u, 1.0, grid);
  CHECK(bf.value > kValueFloor / 2);
  CHECK(bf.strategies > 100);
  // the winning strategy replays to the same value and is admissible
  auto replay = oracle::worst_case_expected_utility(tree, bf.best, u, 1.0);
  CHECK_FALSE(replay.violation.has_value());
  CHECK(replay.value == doctest::Approx(bf.value).epsilon(1e-12));
}
