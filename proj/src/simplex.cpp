#include "rum/simplex.hpp"

#include <cmath>
#include <cstddef>

#include "rum/errors.hpp"

namespace rum {

namespace {

constexpr double kTol = 1e-9;

struct Tableau {
  std::size_t rows = 0, cols = 0;  // cols excludes the rhs column
  std::vector<double> a;           // rows x (cols + 1), rhs last
  std::vector<int> basis;          // basic column per row
  Vec obj;                         // reduced costs, size cols
  double value = 0.0;

  double& at(std::size_t i, std::size_t j) { return a[i * (cols + 1) + j]; }
  double& rhs(std::size_t i) { return a[i * (cols + 1) + cols]; }

  void pivot(std::size_t pr, std::size_t pc) {
    double piv = at(pr, pc);
    for (std::size_t j = 0; j <= cols; ++j) at(pr, j) /= piv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == pr) continue;
      double f = at(i, pc);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols; ++j) at(i, j) -= f * at(pr, j);
    }
    double f = obj[pc];
    if (f != 0.0) {
      for (std::size_t j = 0; j < cols; ++j) obj[j] -= f * at(pr, j);
      value -= f * rhs(pr);
    }
    basis[pr] = static_cast<int>(pc);
  }

  // Bland's rule; entering_limit bars columns >= limit from entering.
  // Returns Optimal or Unbounded.
  LPStatus run(std::size_t entering_limit, std::size_t& pivots, std::size_t max_pivots) {
    for (;;) {
      std::size_t enter = cols;
      for (std::size_t j = 0; j < entering_limit; ++j)
        if (obj[j] < -kTol) {
          enter = j;
          break;
        }
      if (enter == cols) return LPStatus::Optimal;

      std::size_t leave = rows;
      double best_ratio = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        double aij = at(i, enter);
        if (aij <= kTol) continue;
        double ratio = rhs(i) / aij;
        if (leave == rows || ratio < best_ratio - kTol ||
            (ratio < best_ratio + kTol && basis[i] < basis[leave]))
          leave = i, best_ratio = ratio;
      }
      if (leave == rows) return LPStatus::Unbounded;
      pivot(leave, enter);
      if (++pivots > max_pivots)
        throw numerical_error("simplex: pivot budget exhausted");
    }
  }
};

}  // namespace

LPResult simplex_maximize(const Mat& A, const Vec& b, const Vec& c) {
  const std::size_t m = A.size();
  const std::size_t n = c.size();

  std::vector<std::size_t> artificial_rows;
  for (std::size_t i = 0; i < m; ++i)
    if (b[i] < 0.0) artificial_rows.push_back(i);
  const std::size_t n_art = artificial_rows.size();

  Tableau t;
  t.rows = m;
  t.cols = n + m + n_art;
  t.a.assign(m * (t.cols + 1), 0.0);
  t.basis.assign(m, -1);

  std::size_t art = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double sign = b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = sign * A[i][j];
    t.at(i, n + i) = sign;  // slack
    t.rhs(i) = sign * b[i];
    if (b[i] < 0.0) {
      t.at(i, n + m + art) = 1.0;
      t.basis[i] = static_cast<int>(n + m + art);
      ++art;
    } else {
      t.basis[i] = static_cast<int>(n + i);
    }
  }

  const std::size_t max_pivots = 400 + 60 * (m + n);
  std::size_t pivots = 0;

  if (n_art > 0) {
    // Phase 1: maximize -(sum of artificials).
    t.obj.assign(t.cols, 0.0);
    for (std::size_t k = 0; k < n_art; ++k) t.obj[n + m + k] = 1.0;
    t.value = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis[i] < static_cast<int>(n + m)) continue;
      for (std::size_t j = 0; j < t.cols; ++j) t.obj[j] -= t.at(i, j);
      t.value -= t.rhs(i);
    }
    LPStatus s = t.run(t.cols, pivots, max_pivots);
    if (s == LPStatus::Unbounded)
      throw numerical_error("simplex: phase 1 reported unbounded");
    if (t.value < -kTol) return {LPStatus::Infeasible, 0.0, {}};
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis[i] < static_cast<int>(n + m)) continue;
      for (std::size_t j = 0; j < n + m; ++j)
        if (std::fabs(t.at(i, j)) > kTol) {
          t.pivot(i, j);
          break;
        }
    }
  }

  // Phase 2 objective from the current basis.
  t.obj.assign(t.cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) t.obj[j] = -c[j];
  t.value = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    int bj = t.basis[i];
    if (bj >= 0 && bj < static_cast<int>(n) && c[bj] != 0.0) {
      double cb = c[bj];
      for (std::size_t j = 0; j < t.cols; ++j) t.obj[j] += cb * t.at(i, j);
      t.value += cb * t.rhs(i);
    }
  }

  LPStatus s = t.run(n + m, pivots, max_pivots);
  if (s == LPStatus::Unbounded) return {LPStatus::Unbounded, 0.0, {}};

  LPResult res;
  res.status = LPStatus::Optimal;
  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    int bj = t.basis[i];
    if (bj >= 0 && bj < static_cast<int>(n)) res.x[bj] = t.rhs(i);
  }
  res.objective = dot(res.x, c);
  return res;
}

}  // namespace rum
