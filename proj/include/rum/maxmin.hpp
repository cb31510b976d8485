// One-period robust utility maximization over the admissible polytope.
#pragma once

#include "rum/errors.hpp"
#include "rum/model.hpp"
#include "rum/na.hpp"

namespace rum {

// Continuation payoff of one support child: either the terminal utility
// (with that child's endowment) or a stored value function slice.
struct Continuation {
  const ConcavePLF* plf = nullptr;
  const UtilitySpec* utility = nullptr;
  double endowment = 0.0;

  double value(double wealth) const;
  // Supergradient slope, left derivative at kinks.
  double slope(double wealth) const;
  // Second derivative; only meaningful when smooth().
  double curvature(double wealth) const;
  bool smooth() const { return utility != nullptr && utility->smooth(); }
  // Wealth below which the value is the floor sentinel.
  double domain_min() const;
  bool diverges_at_domain_min() const;
};

struct OnePeriodProblem {
  const na::SupportData* support = nullptr;
  const MeasureSet* measures = nullptr;  // extremes over all children of the node
  double capital = 0.0;                  // x >= 0
  std::vector<Continuation> continuations;  // parallel to support->vectors
};

struct Objective {
  double value = kValueFloor;
  int active = -1;  // argmin extreme measure, lowest index on ties
};

// min over extreme measures of the expected continuation value at x + h.v_i,
// summed over positively charged support children. Floor sentinel (absorbing)
// if any charged child ends outside the continuation domain.
Objective robust_objective(const OnePeriodProblem& p, const Vec& h);

struct MaxminSolution {
  Vec h;              // holdings in the span; inside K_x within 1e-9
  double value = kValueFloor;
  double gap = 0.0;   // certified bound on (sup - value)
  int active = -1;
  int iterations = 0;
};

// Raised when the cutting-plane loop hits its iteration cap before the gap
// closes; carries the incumbent.
struct iteration_limit_error : numerical_error {
  MaxminSolution best;
  iteration_limit_error(const std::string& msg, MaxminSolution b)
      : numerical_error(msg), best(std::move(b)) {}
};

// Maximizes the robust objective over K_x by a cutting-plane iteration whose
// master bound certifies the gap. dim(span)==1 runs the closed-form
// two-tangent specialization; smooth single-active optima get a Newton polish
// whose gradient certificate can close the gap early. Continuations that
// diverge at their domain edge are kept a relative ~1e-7 inside it, which is
// where such optima live unless some conditional probability is comparably
// tiny. Throws arbitrage_error when K_x is unbounded (the node fails the
// no-arbitrage check), iteration_limit_error at the cap.
MaxminSolution solve_one_period(const OnePeriodProblem& p, double tol = 1e-8,
                                int max_iterations = 10000, bool na_verified = false,
                                const Vec* warm_start = nullptr);

// Max of the exact objective over the step-lattice of R^d inside a box
// covering K_x (radius capital / margin). The objective depends only on the
// projection onto the span, so this converges to the solver value as the
// step shrinks, and nested steps give nondecreasing values.
double grid_search_value(const OnePeriodProblem& p, double step);

}  // namespace rum
