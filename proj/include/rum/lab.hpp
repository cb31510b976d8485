// Demonstration instances: the heavy-tail truncation family quantifying
// nonattainment for unbounded utilities, its random-utility variant, and the
// one-dimensional attainment demo.
#pragma once

#include <cstdint>

#include "rum/maxmin.hpp"
#include "rum/model.hpp"

namespace rum::lab {

// One-period two-asset market. Asset 2 moves by -1 or +2; asset 1 is heavy
// tailed: the second extreme measure puts geometric weight on atoms 2^{2n},
// n = 1..level, with the truncated tail mass folded onto the largest atom so
// the positive part keeps probability 1/2 at every level. E[U+((dS1)+)]
// grows linearly in the level for the square-root utility, which is what
// drives the optimizer toward the boundary.
ScenarioTree build_truncated_example(int level, const UtilitySpec& utility);

struct TruncationRow {
  int level = 0;
  double h1 = 0.0;           // optimizer component on the heavy-tailed asset
  double h2 = 0.0;           // optimizer component on the bounded asset
  double value = 0.0;        // robust value of the truncated market
  double value_at_limit = 0.0;  // robust objective of the limit point (0, g2)
  double gap = 0.0;          // value - value_at_limit
};

struct TruncationStudy {
  std::vector<TruncationRow> rows;
  double g2 = 0.0;  // optimizer of the bounded-asset subproblem at h1 = 0
};

// Solves the truncated market at each level. The signature of nonattainment
// in the limit market: h1 strictly positive and decreasing toward 0, value
// strictly increasing, while the value at the limit point stays flat, so the
// gap persists. Finite levels always have optimizers; the study diagnoses
// the limit, it never claims a finite instance lacks one.
TruncationStudy run_nonexistence_study(const std::vector<int>& levels,
                                       const UtilitySpec& utility, double x, double tol = 1e-8);

// Same family with only the heavy-tailed asset tradable and the bounded
// asset's contribution moved into terminal endowments e = g2 * dS2 (a random
// utility shift). Reference utility: square root. Reproduces the same
// signature with matching gaps.
TruncationStudy random_utility_variant(const std::vector<int>& levels, double x,
                                       double tol = 1e-8);

struct ExistenceReport {
  int instances = 0;         // accepted (arbitrage-free, nondegenerate) instances
  int attained = 0;          // solver value >= lattice supremum - tol
  int rejected_by_na = 0;    // generated instances failing the arbitrage check
  int rejected_degenerate = 0;  // margin too small for an exhaustive lattice
  double worst_shortfall = 0.0; // max over instances of lattice value - solver value
  bool all_attained() const { return attained == instances; }
};

// Random one-asset one-period markets (atoms in [-1, 3], random extreme
// measures) solved and compared against the exhaustive step-lattice value.
// With one asset and a deterministic utility finite at zero wealth the
// optimum is always attained, so every accepted instance must close the gap.
ExistenceReport one_dim_existence_demo(std::uint64_t seed, int instances = 100,
                                       double tol = 1e-8, double step = 1e-3);

}  // namespace rum::lab
