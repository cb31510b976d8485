// Extended-real conventions and small dense vector helpers shared across the library.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace rum {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

// Sentinel standing in for -infinity. It is absorbing in comparisons and in
// probability-weighted sums: any term at the floor drags the whole sum down.
inline constexpr double kValueFloor = -1e18;

inline bool is_floor(double v) { return v <= 0.5 * kValueFloor; }

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec scaled(const Vec& x, double alpha) {
  Vec r = x;
  for (double& v : r) v *= alpha;
  return r;
}

}  // namespace rum
