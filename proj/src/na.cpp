#include "rum/na.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rum/errors.hpp"
#include "rum/simplex.hpp"

namespace rum::na {

namespace {

constexpr double kNATol = 1e-9;
constexpr double kFacetTol = 1e-8;

Vec coordinates(const Mat& basis, const Vec& v) {
  Vec w(basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j) w[j] = dot(basis[j], v);
  return w;
}

}  // namespace

SupportData compute_support(const ScenarioTree& tree, NodeId node) {
  SupportData s;
  s.node = node;
  const Node& n = tree.nodes[node];
  for (std::size_t slot = 0; slot < n.children.size(); ++slot) {
    bool charged = false;
    for (const Vec& p : n.measures.extremes)
      if (p[slot] > 0.0) {
        charged = true;
        break;
      }
    if (!charged) continue;
    NodeId c = n.children[slot];
    Vec v(tree.asset_count);
    for (int a = 0; a < tree.asset_count; ++a) v[a] = tree.nodes[c].price[a] - n.price[a];
    s.scale = std::max(s.scale, norm2(v));
    s.children.push_back(c);
    s.child_slots.push_back(static_cast<int>(slot));
    s.vectors.push_back(std::move(v));
  }

  // Rank-revealing Gram-Schmidt with pivoting on the residual norm.
  const double cutoff = 1e-10 * std::max(1.0, s.scale);
  Mat residuals = s.vectors;
  const int d = tree.asset_count;
  while (static_cast<int>(s.basis.size()) < d) {
    std::size_t best = residuals.size();
    double best_norm = cutoff;
    for (std::size_t i = 0; i < residuals.size(); ++i) {
      double nrm = norm2(residuals[i]);
      if (nrm > best_norm) {
        best = i;
        best_norm = nrm;
      }
    }
    if (best == residuals.size()) break;
    Vec b = scaled(residuals[best], 1.0 / best_norm);
    // re-orthogonalize once for numerical hygiene
    for (const Vec& prev : s.basis) axpy(-dot(prev, b), prev, b);
    double nb = norm2(b);
    if (nb <= 0.5) continue;
    b = scaled(b, 1.0 / nb);
    for (Vec& r : residuals) axpy(-dot(b, r), b, r);
    s.basis.push_back(std::move(b));
  }

  for (const Vec& v : s.vectors) s.coords.push_back(coordinates(s.basis, v));

  s.projector.assign(d, Vec(d, 0.0));
  for (const Vec& b : s.basis)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s.projector[i][j] += b[i] * b[j];
  return s;
}

Vec project_to_span(const SupportData& support, const Vec& h) {
  Vec r(h.size(), 0.0);
  for (const Vec& b : support.basis) axpy(dot(b, h), b, r);
  return r;
}

NAResult check_node(const SupportData& support) {
  NAResult result;
  const int k = support.dim();
  const std::size_t m = support.vectors.size();
  if (k == 0 || m == 0) return result;  // no directions, nothing to exploit

  // Variables: z+ (k), z- (k), s (m). Maximize sum(s) subject to
  //   -w_i.z <= 0        (all gains nonnegative)
  //    s_i   <= 1
  //    s_i - w_i.z <= 0  (s capped by the gain)
  const std::size_t nv = 2 * static_cast<std::size_t>(k) + m;
  Mat A(3 * m, Vec(nv, 0.0));
  Vec b(3 * m, 0.0), c(nv, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec& w = support.coords[i];
    for (int j = 0; j < k; ++j) {
      A[i][j] = -w[j];
      A[i][k + j] = w[j];
      A[2 * m + i][j] = -w[j];
      A[2 * m + i][k + j] = w[j];
    }
    A[m + i][2 * k + i] = 1.0;
    b[m + i] = 1.0;
    A[2 * m + i][2 * k + i] = 1.0;
    c[2 * k + i] = 1.0;
  }

  LPResult lp = simplex_maximize(A, b, c);
  if (lp.status != LPStatus::Optimal)
    throw numerical_error("arbitrage check: unexpected LP status");
  if (lp.objective <= kNATol) return result;

  result.holds = false;
  Vec h(support.basis.empty() ? 0 : support.basis[0].size(), 0.0);
  for (int j = 0; j < k; ++j) axpy(lp.x[j] - lp.x[k + j], support.basis[j], h);
  double nrm = norm2(h);
  if (nrm > 0.0) h = scaled(h, 1.0 / nrm);
  result.witness = std::move(h);
  return result;
}

std::map<NodeId, NAResult> check_tree(const ScenarioTree& tree) {
  std::map<NodeId, NAResult> results;
  auto keep = nonpolar_mask(tree);
  for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
    if (!keep[n] || tree.is_terminal(n)) continue;
    results.emplace(n, check_node(compute_support(tree, n)));
  }
  return results;
}

bool AdmissiblePolytope::contains(const Vec& h, double tol) const {
  for (const Vec& v : gains)
    if (capital + dot(h, v) < -tol) return false;
  // membership in the span
  Vec proj(h.size(), 0.0);
  for (const Vec& b : subspace) axpy(dot(b, h), b, proj);
  for (std::size_t i = 0; i < h.size(); ++i)
    if (std::fabs(h[i] - proj[i]) > tol) return false;
  return true;
}

AdmissiblePolytope admissible_polytope(const SupportData& support, double x) {
  AdmissiblePolytope poly;
  poly.node = support.node;
  poly.capital = x;
  poly.gains = support.vectors;
  poly.subspace = support.basis;
  poly.bounded = check_node(support).holds;
  return poly;
}

namespace {

// Distance from the origin to the hull boundary via facet enumeration in
// span coordinates; points are the rows of coords (dimension k <= 3).
double hull_inradius(const Mat& coords, int k, double scale) {
  const double tol = kFacetTol * std::max(1.0, scale);
  const std::size_t m = coords.size();
  double best = std::numeric_limits<double>::infinity();

  if (k == 1) {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (const Vec& w : coords) {
      hi = std::max(hi, w[0]);
      lo = std::min(lo, w[0]);
    }
    return std::min(hi, -lo);
  }

  if (k == 2) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        Vec e{coords[j][0] - coords[i][0], coords[j][1] - coords[i][1]};
        Vec n{-e[1], e[0]};
        double nn = norm2(n);
        if (nn <= 1e-12 * std::max(1.0, scale)) continue;
        n = scaled(n, 1.0 / nn);
        double o = dot(n, coords[i]);
        bool below = true, above = true;
        for (const Vec& w : coords) {
          double s = dot(n, w) - o;
          if (s > tol) below = false;
          if (s < -tol) above = false;
        }
        if (below) best = std::min(best, o);
        if (above) best = std::min(best, -o);
      }
    return best;
  }

  // k == 3
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t l = j + 1; l < m; ++l) {
        Vec a{coords[j][0] - coords[i][0], coords[j][1] - coords[i][1],
              coords[j][2] - coords[i][2]};
        Vec bvec{coords[l][0] - coords[i][0], coords[l][1] - coords[i][1],
                 coords[l][2] - coords[i][2]};
        Vec n{a[1] * bvec[2] - a[2] * bvec[1], a[2] * bvec[0] - a[0] * bvec[2],
              a[0] * bvec[1] - a[1] * bvec[0]};
        double nn = norm2(n);
        if (nn <= 1e-12 * std::max(1.0, scale * scale)) continue;
        n = scaled(n, 1.0 / nn);
        double o = dot(n, coords[i]);
        bool below = true, above = true;
        for (const Vec& w : coords) {
          double s = dot(n, w) - o;
          if (s > tol) below = false;
          if (s < -tol) above = false;
        }
        if (below) best = std::min(best, o);
        if (above) best = std::min(best, -o);
      }
  return best;
}

}  // namespace

double nondegeneracy_margin(const SupportData& support) {
  const int k = support.dim();
  if (k == 0) return std::numeric_limits<double>::infinity();
  if (!check_node(support).holds)
    throw arbitrage_error("margin undefined: node admits arbitrage");
  return hull_inradius(support.coords, k, support.scale);
}

}  // namespace rum::na
