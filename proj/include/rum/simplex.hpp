// Small dense linear programming via a two-phase tableau simplex.
#pragma once

#include "rum/numeric.hpp"

namespace rum {

enum class LPStatus { Optimal, Infeasible, Unbounded };

struct LPResult {
  LPStatus status = LPStatus::Infeasible;
  double objective = 0.0;
  Vec x;  // structural variables only
};

// Maximize c.x subject to A x <= b, x >= 0. Dense two-phase tableau with
// Bland's rule (anti-cycling) and a 1e-9 feasibility tolerance. Intended for
// the small problems this library produces (tens of rows); throws
// numerical_error if the pivot budget is exhausted.
LPResult simplex_maximize(const Mat& A, const Vec& b, const Vec& c);

}  // namespace rum
