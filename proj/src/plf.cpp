#include "rum/plf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rum {

ConcavePLF::ConcavePLF(Vec knots, Vec values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() != values_.size() || knots_.size() < 2)
    throw std::invalid_argument("piecewise-linear function needs >= 2 matching knots/values");
  if (knots_.front() <= 0.0)
    throw std::invalid_argument("piecewise-linear knots must be positive");
  for (std::size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i] > knots_[i - 1]))
      throw std::invalid_argument("piecewise-linear knots must be strictly increasing");
}

ConcavePLF ConcavePLF::fit(const Vec& knots, const Vec& values, double* repair) {
  const std::size_t m = knots.size();
  if (m != values.size() || m < 2)
    throw std::invalid_argument("fit needs >= 2 matching knots/values");

  // Slopes with segment lengths as weights.
  Vec slope(m - 1), weight(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    weight[i] = knots[i + 1] - knots[i];
    slope[i] = (values[i + 1] - values[i]) / weight[i];
  }

  // Pool adjacent violators for a nonincreasing sequence.
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> stack;
  stack.reserve(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    stack.push_back(Block{slope[i], weight[i], 1});
    while (stack.size() >= 2 && stack[stack.size() - 2].mean < stack.back().mean) {
      Block hi = stack.back();
      stack.pop_back();
      Block lo = stack.back();
      stack.pop_back();
      double w = lo.weight + hi.weight;
      stack.push_back(
          Block{(lo.mean * lo.weight + hi.mean * hi.weight) / w, w, lo.count + hi.count});
    }
  }
  Vec fitted;
  fitted.reserve(m - 1);
  for (const Block& b : stack)
    for (std::size_t i = 0; i < b.count; ++i) fitted.push_back(b.mean);
  for (double& s : fitted) s = std::max(s, 0.0);

  Vec y(m);
  y[0] = values[0];
  for (std::size_t i = 0; i + 1 < m; ++i) y[i + 1] = y[i] + fitted[i] * weight[i];

  if (repair) {
    double r = 0.0;
    for (std::size_t i = 0; i < m; ++i) r = std::max(r, std::fabs(y[i] - values[i]));
    *repair = r;
  }
  return ConcavePLF(Vec(knots), std::move(y));
}

double ConcavePLF::first_slope() const {
  return (values_[1] - values_[0]) / (knots_[1] - knots_[0]);
}

double ConcavePLF::final_slope() const {
  std::size_t m = knots_.size();
  double s = (values_[m - 1] - values_[m - 2]) / (knots_[m - 1] - knots_[m - 2]);
  return std::max(s, 0.0);
}

double ConcavePLF::eval(double x) const {
  if (x < 0.0) return kValueFloor;
  if (x <= knots_.front())
    return values_.front() - first_slope() * (knots_.front() - x);
  if (x >= knots_.back())
    return values_.back() + final_slope() * (x - knots_.back());
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  std::size_t lo = hi - 1;
  double t = (x - knots_[lo]) / (knots_[hi] - knots_[lo]);
  return values_[lo] + t * (values_[hi] - values_[lo]);
}

double ConcavePLF::left_derivative(double x) const {
  if (x <= knots_.front()) return first_slope();
  if (x > knots_.back()) return final_slope();
  auto it = std::lower_bound(knots_.begin(), knots_.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  if (hi == 0) return first_slope();
  std::size_t lo = hi - 1;
  if (knots_[hi] < x) return final_slope();  // unreachable, guarded above
  return (values_[hi] - values_[lo]) / (knots_[hi] - knots_[lo]);
}

bool ConcavePLF::is_concave(double tol) const {
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
    double s = (values_[i + 1] - values_[i]) / (knots_[i + 1] - knots_[i]);
    if (s > prev + tol) return false;
    prev = s;
  }
  return true;
}

bool ConcavePLF::is_nondecreasing(double tol) const {
  for (std::size_t i = 0; i + 1 < values_.size(); ++i)
    if (values_[i + 1] < values_[i] - tol) return false;
  return true;
}

}  // namespace rum
