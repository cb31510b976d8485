#include "rum/maxmin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rum/simplex.hpp"

namespace rum {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double Continuation::value(double wealth) const {
  if (plf) return plf->eval(wealth);
  return evaluate_utility(*utility, wealth, endowment);
}

double Continuation::slope(double wealth) const {
  if (plf) return plf->left_derivative(wealth);
  double arg = utility->endowment_enabled() ? wealth + endowment : wealth;
  return utility->derivative(std::max(arg, 1e-300));
}

double Continuation::curvature(double wealth) const {
  if (plf) return 0.0;
  double arg = utility->endowment_enabled() ? wealth + endowment : wealth;
  return utility->second_derivative(std::max(arg, 1e-300));
}

double Continuation::domain_min() const {
  if (plf) return 0.0;
  if (utility->endowment_enabled()) return std::max(0.0, -endowment);
  return 0.0;
}

bool Continuation::diverges_at_domain_min() const {
  if (plf || !utility->diverges_at_zero()) return false;
  // the utility argument at the wealth domain edge
  double arg = utility->endowment_enabled() ? domain_min() + endowment : 0.0;
  return arg <= 0.0;
}

namespace {

// Worst case over extremes given per-support-child wealths.
Objective eval_wealths(const OnePeriodProblem& p, const Vec& wealth) {
  const auto& slots = p.support->child_slots;
  Objective out;
  double best = kInf;
  for (std::size_t j = 0; j < p.measures->extremes.size(); ++j) {
    const Vec& prob = p.measures->extremes[j];
    double acc = 0.0;
    bool floored = false;
    for (std::size_t i = 0; i < wealth.size(); ++i) {
      double pr = prob[slots[i]];
      if (pr <= 0.0) continue;
      double v = p.continuations[i].value(wealth[i]);
      if (is_floor(v)) {
        floored = true;
        break;
      }
      acc += pr * v;
    }
    double val = floored ? kValueFloor : acc;
    if (val < best) {
      best = val;
      out.active = static_cast<int>(j);
    }
  }
  out.value = best == kInf ? kValueFloor : best;
  return out;
}

// Everything the iteration needs, expressed in span coordinates z where
// h = zscale * sum_a z_a basis_a and the wealth at child i is x + coords_i . z.
// The coordinates are pre-scaled by the capital so the feasible polytope has
// O(1) extent at every capital scale; otherwise the master LP mixes slopes
// of order 1/x with constraint levels of order x and its pivot tolerances
// stall the bound once x is small.
struct SolveState {
  const OnePeriodProblem& p;
  int k;
  double x;
  double zscale;
  Mat coords;        // support coords times zscale
  Vec floor_wealth;  // tightened constraint levels per child
  double safety;

  explicit SolveState(const OnePeriodProblem& prob)
      : p(prob), k(prob.support->dim()), x(prob.capital) {
    zscale = x > 1e-150 ? x : 1.0;
    coords = prob.support->coords;
    for (Vec& row : coords)
      for (double& v : row) v *= zscale;
    safety = std::max(1e-7 * x, 1e-12 * (1.0 + prob.support->scale));
    floor_wealth.resize(prob.continuations.size());
    for (std::size_t i = 0; i < prob.continuations.size(); ++i) {
      const Continuation& c = prob.continuations[i];
      floor_wealth[i] = c.domain_min() + safety * (c.diverges_at_domain_min() ? 2.0 : 1.0);
    }
  }

  Vec wealths(const Vec& z) const {
    Vec w(p.continuations.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = x + dot(coords[i], z);
    return w;
  }

  Objective eval(const Vec& z) const { return eval_wealths(p, wealths(z)); }

  bool feasible(const Vec& z, double slack = 0.0) const {
    for (std::size_t i = 0; i < p.continuations.size(); ++i)
      if (x + dot(coords[i], z) < floor_wealth[i] - slack) return false;
    return true;
  }

  // Supergradient of the active extreme's expectation, in z coordinates.
  Vec supergradient(const Vec& z, int j) const {
    Vec g(k, 0.0);
    const Vec& prob = p.measures->extremes[j];
    for (std::size_t i = 0; i < p.continuations.size(); ++i) {
      double pr = prob[p.support->child_slots[i]];
      if (pr <= 0.0) continue;
      double w = x + dot(coords[i], z);
      axpy(pr * p.continuations[i].slope(w), coords[i], g);
    }
    return g;
  }

  Vec to_holdings(const Vec& z) const {
    Vec h(p.support->basis.empty() ? p.support->projector.size() : p.support->basis[0].size(),
          0.0);
    for (int a = 0; a < k; ++a) axpy(z[a] * zscale, p.support->basis[a], h);
    return h;
  }
};

struct Cut {
  Vec z;
  double value;
  Vec grad;
  double rhs;  // value - grad.z
  long id;
};

// Master LP: maximize theta s.t. theta <= cuts, z inside the tightened
// polytope. theta is shifted so that all cut rows have nonnegative rhs,
// keeping the common case single-phase.
struct MasterResult {
  Vec z;
  double bound;
};

MasterResult solve_master(const SolveState& st, const std::vector<Cut>& cuts) {
  const int k = st.k;
  const std::size_t m = st.p.continuations.size();
  const std::size_t n = 2 * k + 2;  // z+, z-, theta+, theta-

  double min_rhs = 0.0;
  for (const Cut& c : cuts) min_rhs = std::min(min_rhs, c.rhs);
  const double shift = 1.0 - min_rhs;

  Mat A(m + cuts.size(), Vec(n, 0.0));
  Vec b(m + cuts.size(), 0.0), obj(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    // scaled constraint row divided through by zscale, keeping coefficients
    // and levels both O(1)
    const Vec& w = st.p.support->coords[i];
    for (int a = 0; a < k; ++a) {
      A[i][a] = -w[a];
      A[i][k + a] = w[a];
    }
    b[i] = (st.x - st.floor_wealth[i]) / st.zscale;
  }
  for (std::size_t l = 0; l < cuts.size(); ++l) {
    std::size_t r = m + l;
    for (int a = 0; a < k; ++a) {
      A[r][a] = -cuts[l].grad[a];
      A[r][k + a] = cuts[l].grad[a];
    }
    A[r][2 * k] = 1.0;
    A[r][2 * k + 1] = -1.0;
    b[r] = cuts[l].rhs + shift;
  }
  obj[2 * k] = 1.0;
  obj[2 * k + 1] = -1.0;

  LPResult lp = simplex_maximize(A, b, obj);
  if (lp.status == LPStatus::Unbounded)
    throw arbitrage_error("one-period problem: admissible set unbounded");
  if (lp.status == LPStatus::Infeasible)
    throw numerical_error("one-period problem: master infeasible");

  MasterResult res;
  res.z.resize(k);
  for (int a = 0; a < k; ++a) res.z[a] = lp.x[a] - lp.x[k + a];
  res.bound = lp.x[2 * k] - lp.x[2 * k + 1] - shift;
  return res;
}

// Finds any point of the tightened polytope by maximizing the worst slack.
// Returns false when the effective domain is empty.
bool bootstrap_point(const SolveState& st, Vec& z) {
  z.assign(st.k, 0.0);
  if (st.feasible(z)) return true;
  const int k = st.k;
  const std::size_t m = st.p.continuations.size();
  const std::size_t n = 2 * k + 1;
  Mat A(m + 1, Vec(n, 0.0));
  Vec b(m + 1, 0.0), obj(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec& w = st.p.support->coords[i];
    for (int a = 0; a < k; ++a) {
      A[i][a] = -w[a];
      A[i][k + a] = w[a];
    }
    A[i][2 * k] = 1.0;
    b[i] = (st.x - st.floor_wealth[i]) / st.zscale;
  }
  A[m][2 * k] = 1.0;
  b[m] = 1.0;
  obj[2 * k] = 1.0;
  LPResult lp = simplex_maximize(A, b, obj);
  if (lp.status != LPStatus::Optimal || lp.objective <= 0.0) return false;
  for (int a = 0; a < k; ++a) z[a] = lp.x[a] - lp.x[k + a];
  return st.feasible(z, 1e-12);
}

MaxminSolution trivial_solution(const SolveState& st) {
  MaxminSolution s;
  s.h.assign(st.p.support->projector.size(), 0.0);
  Objective o = robust_objective(st.p, s.h);
  s.value = o.value;
  s.active = o.active;
  s.gap = 0.0;
  return s;
}

double polytope_diameter(const SolveState& st) {
  // measured in the scaled coordinates the iteration works in
  double margin = na::nondegeneracy_margin(*st.p.support);
  if (!std::isfinite(margin) || margin <= 0.0) return 0.0;
  return 2.0 * st.x / (margin * st.zscale);
}

// Newton refinement of the active extreme's expectation. Only accepted when
// the iterate stays feasible and the same extreme stays the unique worst
// case, in which case the point maximizes the robust objective as well and
// the gradient certificate bounds the remaining gap.
struct PolishOutcome {
  bool improved = false;
  Vec z;
  Objective obj;
  double certificate = kInf;
};

PolishOutcome try_polish(const SolveState& st, const Vec& z0, const Objective& at_z0,
                         double diameter) {
  PolishOutcome out;
  for (const Continuation& c : st.p.continuations)
    if (!c.smooth()) return out;
  if (at_z0.active < 0) return out;

  const int k = st.k;
  int j = at_z0.active;
  Vec z = z0;

  auto f_value = [&](const Vec& zz) {
    const Vec& prob = st.p.measures->extremes[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < st.p.continuations.size(); ++i) {
      double pr = prob[st.p.support->child_slots[i]];
      if (pr <= 0.0) continue;
      double v = st.p.continuations[i].value(st.x + dot(st.coords[i], zz));
      if (is_floor(v)) return -kInf;
      acc += pr * v;
    }
    return acc;
  };

  double fz = f_value(z);
  if (!std::isfinite(fz)) return out;

  for (int step = 0; step < 60; ++step) {
    // gradient and Hessian of the active expectation
    Vec g(k, 0.0);
    Mat H(k, Vec(k, 0.0));
    const Vec& prob = st.p.measures->extremes[j];
    for (std::size_t i = 0; i < st.p.continuations.size(); ++i) {
      double pr = prob[st.p.support->child_slots[i]];
      if (pr <= 0.0) continue;
      const Vec& w = st.coords[i];
      double wealth = st.x + dot(w, z);
      axpy(pr * st.p.continuations[i].slope(wealth), w, g);
      double curv = pr * st.p.continuations[i].curvature(wealth);
      for (int a = 0; a < k; ++a)
        for (int c2 = 0; c2 < k; ++c2) H[a][c2] += curv * w[a] * w[c2];
    }

    // Solve H s = -g by Gaussian elimination with partial pivoting.
    Mat M = H;
    Vec s(k);
    for (int a = 0; a < k; ++a) s[a] = -g[a];
    bool singular = false;
    std::vector<int> perm(k);
    for (int a = 0; a < k; ++a) perm[a] = a;
    for (int col = 0; col < k && !singular; ++col) {
      int piv = col;
      for (int r = col + 1; r < k; ++r)
        if (std::fabs(M[r][col]) > std::fabs(M[piv][col])) piv = r;
      if (std::fabs(M[piv][col]) < 1e-14 * (1.0 + std::fabs(M[col][col]))) {
        singular = true;
        break;
      }
      std::swap(M[piv], M[col]);
      std::swap(s[piv], s[col]);
      for (int r = col + 1; r < k; ++r) {
        double f = M[r][col] / M[col][col];
        if (f == 0.0) continue;
        for (int c2 = col; c2 < k; ++c2) M[r][c2] -= f * M[col][c2];
        s[r] -= f * s[col];
      }
    }
    if (singular) break;
    for (int col = k - 1; col >= 0; --col) {
      double acc = s[col];
      for (int c2 = col + 1; c2 < k; ++c2) acc -= M[col][c2] * s[c2];
      s[col] = acc / M[col][col];
    }

    double step_norm = norm2(s);
    if (!(step_norm > 0.0) || !std::isfinite(step_norm)) break;

    double t = 1.0;
    bool moved = false;
    while (t >= 1e-12) {
      Vec cand = z;
      axpy(t, s, cand);
      if (st.feasible(cand, -0.0)) {
        double fc = f_value(cand);
        if (std::isfinite(fc) && fc >= fz - 1e-15 * (1.0 + std::fabs(fz))) {
          z = cand;
          fz = fc;
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) break;
    if (t * step_norm <= 1e-14 * (1.0 + norm2(z))) break;
  }

  Objective o = st.eval(z);
  if (o.active != j || is_floor(o.value)) return out;
  // require the active extreme to stay the strict worst case
  double second = kInf;
  {
    const auto& slots = st.p.support->child_slots;
    Vec wl = st.wealths(z);
    for (std::size_t jj = 0; jj < st.p.measures->extremes.size(); ++jj) {
      if (static_cast<int>(jj) == j) continue;
      const Vec& prob = st.p.measures->extremes[jj];
      double acc = 0.0;
      bool floored = false;
      for (std::size_t i = 0; i < wl.size(); ++i) {
        double pr = prob[slots[i]];
        if (pr <= 0.0) continue;
        double v = st.p.continuations[i].value(wl[i]);
        if (is_floor(v)) {
          floored = true;
          break;
        }
        acc += pr * v;
      }
      if (!floored) second = std::min(second, acc);
    }
  }
  if (second < o.value + 1e-12 * (1.0 + std::fabs(o.value))) return out;

  Vec g_final(k, 0.0);
  {
    const Vec& prob = st.p.measures->extremes[j];
    for (std::size_t i = 0; i < st.p.continuations.size(); ++i) {
      double pr = prob[st.p.support->child_slots[i]];
      if (pr <= 0.0) continue;
      const Vec& w = st.coords[i];
      axpy(pr * st.p.continuations[i].slope(st.x + dot(w, z)), w, g_final);
    }
  }
  out.improved = true;
  out.z = std::move(z);
  out.obj = o;
  out.certificate = norm2(g_final) * diameter;
  return out;
}

MaxminSolution solve_line(const SolveState& st, double tol, int max_iterations) {
  // dim(span) == 1: concave search by intersecting tangents, which is the
  // cutting-plane iteration solved in closed form.
  double lo = -kInf, hi = kInf;
  for (std::size_t i = 0; i < st.p.continuations.size(); ++i) {
    double w = st.coords[i][0];
    double rhs = st.floor_wealth[i] - st.x;
    if (w > 0.0)
      lo = std::max(lo, rhs / w);
    else if (w < 0.0)
      hi = std::min(hi, rhs / w);
    else if (rhs > 0.0)
      return trivial_solution(st);  // constant child infeasible: empty domain
  }
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw arbitrage_error("one-period problem: admissible interval unbounded");
  if (lo > hi) {
    if (lo - hi > 1e-12 * (1.0 + std::fabs(lo))) {
      MaxminSolution s;
      s.h.assign(st.p.support->projector.size(), 0.0);
      s.value = kValueFloor;
      return s;
    }
    lo = hi = 0.5 * (lo + hi);
  }

  auto pack = [&](double z, const Objective& o, double gap, int iters) {
    MaxminSolution s;
    s.h = st.to_holdings(Vec{z});
    s.value = o.value;
    s.active = o.active;
    s.gap = std::max(gap, 0.0);
    s.iterations = iters;
    return s;
  };

  double a = lo, b = hi;
  Objective oa = st.eval(Vec{a}), ob = st.eval(Vec{b});
  double ga = st.supergradient(Vec{a}, oa.active)[0];
  double gb = st.supergradient(Vec{b}, ob.active)[0];

  if (ga <= 0.0 || a == b) return pack(a, oa, 0.0, 0);
  if (gb >= 0.0) return pack(b, ob, 0.0, 0);

  double best_z = oa.value >= ob.value ? a : b;
  Objective best = oa.value >= ob.value ? oa : ob;

  for (int it = 1; it <= max_iterations; ++it) {
    double zc = (ob.value - oa.value + ga * a - gb * b) / (ga - gb);
    if (!std::isfinite(zc) || zc <= a || zc >= b) zc = 0.5 * (a + b);
    double ub = oa.value + ga * (zc - a);
    double gap = ub - best.value;
    if (gap <= tol) return pack(best_z, best, gap, it);

    Objective oc = st.eval(Vec{zc});
    double gc = st.supergradient(Vec{zc}, oc.active)[0];
    if (oc.value > best.value) {
      best = oc;
      best_z = zc;
    }
    if (gc > 0.0) {
      a = zc;
      oa = oc;
      ga = gc;
    } else {
      b = zc;
      ob = oc;
      gb = gc;
    }
    if (b - a <= 1e-17 * (1.0 + std::fabs(a))) return pack(best_z, best, std::max(ub - best.value, 0.0), it);
  }
  MaxminSolution s = pack(best_z, best, kInf, max_iterations);
  throw iteration_limit_error("one-period solver: iteration cap with open gap", s);
}

}  // namespace

Objective robust_objective(const OnePeriodProblem& p, const Vec& h) {
  Vec wealth(p.continuations.size());
  for (std::size_t i = 0; i < wealth.size(); ++i)
    wealth[i] = p.capital + dot(h, p.support->vectors[i]);
  return eval_wealths(p, wealth);
}

MaxminSolution solve_one_period(const OnePeriodProblem& p, double tol, int max_iterations,
                                bool na_verified, const Vec* warm_start) {
  if (p.capital < 0.0) throw std::invalid_argument("solve_one_period: negative capital");
  if (!na_verified && !na::check_node(*p.support).holds)
    throw arbitrage_error("one-period problem: node admits arbitrage");

  SolveState st(p);
  if (st.k == 0 || p.capital == 0.0) return trivial_solution(st);
  if (st.k == 1) return solve_line(st, tol, max_iterations);

  Vec z0;
  if (!bootstrap_point(st, z0)) {
    MaxminSolution s;
    s.h.assign(p.support->projector.size(), 0.0);
    s.value = kValueFloor;
    return s;
  }

  std::vector<Cut> cuts;
  long next_id = 0;
  Vec z_best = z0;
  Objective best = st.eval(z0);

  auto add_cut = [&](Vec z) -> bool {
    Objective o = st.eval(z);
    for (int pull = 0; pull < 60 && is_floor(o.value); ++pull) {
      for (int a = 0; a < st.k; ++a) z[a] = 0.5 * (z[a] + z_best[a]);
      o = st.eval(z);
    }
    if (is_floor(o.value)) return false;
    Vec g = st.supergradient(z, o.active);
    Cut c;
    c.rhs = o.value - dot(g, z);
    c.z = z;
    c.value = o.value;
    c.grad = std::move(g);
    c.id = next_id++;
    cuts.push_back(std::move(c));
    if (o.value > best.value) {
      best = o;
      z_best = std::move(z);
    }
    return true;
  };

  if (is_floor(best.value)) {
    if (!add_cut(z0))
      throw numerical_error("one-period solver: no finite anchor point");
  } else {
    add_cut(z0);
  }
  if (warm_start && !warm_start->empty()) {
    Vec zw(st.k);
    for (int a = 0; a < st.k; ++a) zw[a] = dot(p.support->basis[a], *warm_start) / st.zscale;
    if (st.feasible(zw, 0.0)) add_cut(zw);
  }

  double diameter = -1.0;
  double best_cert = kInf;
  std::size_t budget = 32;
  double last_bound = kInf;
  int stall = 0;
  int last_polish = -5;

  for (int it = 1; it <= max_iterations; ++it) {
    MasterResult master = solve_master(st, cuts);
    double gap = master.bound - best.value;
    if (gap <= tol || best_cert <= tol) {
      MaxminSolution s;
      s.h = st.to_holdings(z_best);
      s.value = best.value;
      s.gap = std::max(std::min(gap, best_cert), 0.0);
      s.active = best.active;
      s.iterations = it;
      return s;
    }

    double trigger = std::max(10.0 * tol, 1e-4 * (1.0 + std::fabs(best.value)));
    if (gap <= trigger && it - last_polish >= 5) {
      last_polish = it;
      if (diameter < 0.0) diameter = polytope_diameter(st);
      PolishOutcome po = try_polish(st, z_best, best, diameter);
      if (po.improved && po.obj.value >= best.value) {
        z_best = po.z;
        best = po.obj;
        best_cert = std::min(best_cert, po.certificate);
        gap = master.bound - best.value;
        if (gap <= tol || best_cert <= tol) {
          MaxminSolution s;
          s.h = st.to_holdings(z_best);
          s.value = best.value;
          s.gap = std::max(std::min(gap, best_cert), 0.0);
          s.active = best.active;
          s.iterations = it;
          return s;
        }
      }
    }

    if (!add_cut(master.z))
      throw numerical_error("one-period solver: cut anchor search failed");

    // bound stall detection drives the cut budget up before dropping bites
    if (last_bound - master.bound < 1e-13 * (1.0 + std::fabs(master.bound))) {
      if (++stall >= 60 && budget < 4096) {
        budget *= 2;
        stall = 0;
      }
    } else {
      stall = 0;
    }
    last_bound = master.bound;

    if (cuts.size() > budget) {
      // keep the cuts tight at the master point plus the most recent ones
      std::vector<std::size_t> order(cuts.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      const Vec& zm = cuts.back().z;
      auto slack = [&](const Cut& c) { return c.rhs + dot(c.grad, zm) - best.value; };
      std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
        return slack(cuts[lhs]) < slack(cuts[rhs]);
      });
      std::vector<Cut> kept;
      kept.reserve(budget);
      long newest = next_id - 8;
      for (std::size_t idx : order) {
        if (kept.size() + 8 >= budget) break;
        if (cuts[idx].id >= newest) continue;
        kept.push_back(cuts[idx]);
      }
      for (const Cut& c : cuts)
        if (c.id >= newest) kept.push_back(c);
      cuts = std::move(kept);
    }
  }

  MaxminSolution s;
  s.h = st.to_holdings(z_best);
  s.value = best.value;
  s.gap = kInf;
  s.active = best.active;
  s.iterations = max_iterations;
  throw iteration_limit_error("one-period solver: iteration cap with open gap", s);
}

double grid_search_value(const OnePeriodProblem& p, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid_search_value: step must be positive");
  double margin = na::nondegeneracy_margin(*p.support);
  const int d = static_cast<int>(p.support->projector.size());
  double radius = std::isfinite(margin) && margin > 0.0 ? p.capital / margin : 0.0;
  long span = static_cast<long>(std::floor(radius / step)) + 1;

  double count = 1.0;
  for (int a = 0; a < d; ++a) count *= static_cast<double>(2 * span + 1);
  if (count > 2e7)
    throw numerical_error("grid_search_value: lattice too large, refine the step or box");

  Vec h(d, 0.0);
  double best = kValueFloor;
  std::vector<long> idx(d, -span);
  for (;;) {
    for (int a = 0; a < d; ++a) h[a] = static_cast<double>(idx[a]) * step;
    bool admissible = true;
    for (const Vec& v : p.support->vectors)
      if (p.capital + dot(h, v) < 0.0) {
        admissible = false;
        break;
      }
    if (admissible) {
      Objective o = robust_objective(p, h);
      if (o.value > best) best = o.value;
    }
    int a = 0;
    for (; a < d; ++a) {
      if (++idx[a] <= span) break;
      idx[a] = -span;
    }
    if (a == d) break;
  }
  return best;
}

}  // namespace rum
