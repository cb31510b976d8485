// Concave piecewise-linear functions on a positive wealth grid.
#pragma once

#include <cstddef>

#include "rum/numeric.hpp"

namespace rum {

// Value function representation used by the backward recursion. Defined by
// knots 0 < x_1 < ... < x_m with values y_1 >= ... interpolated linearly.
// Conventions:
//   - on (0, x_1] the first segment extends linearly down,
//   - f(0) is the limit of that extension,
//   - f(x) for x < 0 is the -infinity sentinel,
//   - beyond x_m the last slope applies, clamped to be nonnegative.
class ConcavePLF {
 public:
  ConcavePLF() = default;

  // Takes ownership of the grid; knots must be strictly increasing and
  // positive. Does not repair: use fit() for raw solver output.
  ConcavePLF(Vec knots, Vec values);

  // Builds a concave nondecreasing fit of (knots, values): slopes are
  // projected onto the nonincreasing-nonnegative cone (pool-adjacent-violators
  // with segment-length weights, then a floor at zero), values are rebuilt
  // from the first knot. *repair receives the max absolute value adjustment.
  static ConcavePLF fit(const Vec& knots, const Vec& values, double* repair = nullptr);

  double eval(double x) const;

  // Supergradient with the left derivative chosen at kinks; for x <= x_1 the
  // first slope, beyond x_m the clamped final slope.
  double left_derivative(double x) const;

  double first_slope() const;
  double final_slope() const;  // already clamped at >= 0

  bool is_concave(double tol = 1e-9) const;
  bool is_nondecreasing(double tol = 1e-9) const;

  const Vec& knots() const { return knots_; }
  const Vec& values() const { return values_; }
  std::size_t size() const { return knots_.size(); }
  bool empty() const { return knots_.empty(); }

 private:
  Vec knots_;
  Vec values_;
};

}  // namespace rum
