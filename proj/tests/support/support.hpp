// Shared test helpers: deterministic instance generators and independent
// reference computations (sphere-grid arbitrage verdicts, greedy worst case).
// Nothing here calls the library's arbitrage/solver kernels unless a helper
// says so explicitly; reference code recomputes from the tree alone.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "rum/model.hpp"

namespace testsupport {

using rum::Mat;
using rum::NodeId;
using rum::ScenarioTree;
using rum::Vec;

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Small builders

inline ScenarioTree one_period_tree(int assets, const Mat& child_prices, const Vec& root_price,
                                    const Mat& extremes) {
  ScenarioTree tree;
  tree.horizon = 1;
  tree.asset_count = assets;
  tree.root = 0;
  tree.nodes.resize(1 + child_prices.size());
  tree.nodes[0].time = 0;
  tree.nodes[0].price = root_price;
  tree.nodes[0].measures.extremes = extremes;
  for (std::size_t c = 0; c < child_prices.size(); ++c) {
    NodeId id = static_cast<NodeId>(1 + c);
    tree.nodes[0].children.push_back(id);
    tree.nodes[id].parent = 0;
    tree.nodes[id].time = 1;
    tree.nodes[id].price = child_prices[c];
  }
  return tree;
}

// The recurring two-extreme instance: one asset, S 1 -> {0, 2}, extreme
// measures (1/2, 1/2) and (0.6, 0.4).
inline ScenarioTree phi_market() {
  return one_period_tree(1, {{0.0}, {2.0}}, {1.0}, {{0.5, 0.5}, {0.6, 0.4}});
}

// ---------------------------------------------------------------------------
// Random probability vectors (occasional exact zeros, never all zero)

inline Vec random_extreme(Rng& rng, int children, double zero_chance) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec w(children, 0.0);
  double sum = 0.0;
  for (int c = 0; c < children; ++c) {
    if (unit(rng) < zero_chance) continue;
    w[c] = 0.05 + unit(rng);
    sum += w[c];
  }
  if (sum == 0.0) {
    w[std::uniform_int_distribution<int>(0, children - 1)(rng)] = 1.0;
    sum = 1.0;
  }
  for (int c = 0; c < children; ++c) w[c] /= sum;
  return w;
}

// ---------------------------------------------------------------------------
// Independent gain geometry (no library calls)

// Children carrying positive probability under some extreme, by slot.
inline std::vector<int> charged_slots(const Mat& extremes, int children) {
  std::vector<int> out;
  for (int c = 0; c < children; ++c) {
    for (const Vec& e : extremes) {
      if (e[c] > 0.0) { out.push_back(c); break; }
    }
  }
  return out;
}

inline Mat charged_increments(const ScenarioTree& tree, NodeId n) {
  const rum::Node& node = tree.nodes[n];
  Mat out;
  for (int slot : charged_slots(node.measures.extremes, static_cast<int>(node.children.size()))) {
    NodeId c = node.children[slot];
    Vec d(tree.asset_count);
    for (int a = 0; a < tree.asset_count; ++a) d[a] = tree.price(c)[a] - tree.price(n)[a];
    out.push_back(std::move(d));
  }
  return out;
}

inline double min_gain(const Mat& increments, const Vec& u) {
  double m = std::numeric_limits<double>::infinity();
  for (const Vec& v : increments) m = std::min(m, rum::dot(u, v));
  return m;
}

inline double increment_scale(const Mat& increments) {
  double s = 0.0;
  for (const Vec& v : increments) s = std::max(s, rum::norm2(v));
  return s;
}

inline Mat unit_sphere_grid(int d) {
  Mat dirs;
  if (d == 1) {
    dirs.push_back({1.0});
    dirs.push_back({-1.0});
  } else if (d == 2) {
    const int n = 16384;
    for (int i = 0; i < n; ++i) {
      double a = 2.0 * M_PI * i / n;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
  } else {
    const int n = 40000;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / n;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double a = golden * i;
      dirs.push_back({r * std::cos(a), r * std::sin(a), z});
    }
  }
  return dirs;
}

// Angular resolution of the grids above (upper bound on the gap to the
// nearest sample), used to widen the indecision band.
inline double sphere_gap(int d) {
  if (d == 1) return 0.0;
  if (d == 2) return 2.0 * M_PI / 16384;
  return 0.02;
}

enum class SphereVerdict { Holds, Violated, Indecisive };

// Independent one-node arbitrage verdict: maximize the minimum gain over the
// sampled unit sphere. A sampled direction with strictly positive minimum
// gain is an exact certificate of arbitrage; a maximum safely below the
// angular slack certifies none exists. Anything in between is reported
// indecisive so corpora can regenerate instead of guessing. pos_band can be
// raised when the downstream comparison needs a wider arbitrage cone (the
// coarse whole-tree lattice search does).
inline SphereVerdict sphere_na_verdict(const Mat& increments, int d, double pos_band = 1e-3) {
  if (increments.empty()) return SphereVerdict::Holds;
  double scale = increment_scale(increments);
  if (scale == 0.0) return SphereVerdict::Holds;
  double best = -std::numeric_limits<double>::infinity();
  for (const Vec& u : unit_sphere_grid(d)) best = std::max(best, min_gain(increments, u));
  if (best >= pos_band * scale) return SphereVerdict::Violated;
  if (best <= -(sphere_gap(d) + 1e-3) * scale) return SphereVerdict::Holds;
  return SphereVerdict::Indecisive;
}

// ---------------------------------------------------------------------------
// One-period instances on a dyadic atom lattice

struct OnePeriodConfig {
  int assets = 1;
  int min_children = 2;
  int max_children = 5;
  int max_extremes = 3;
  double zero_chance = 0.15;
  double atom_lo = -1.0;
  double atom_hi = 1.5;
  double lattice = 0.125;  // atoms are multiples of this (exact in floats)
  double base_price = 2.0;
};

inline ScenarioTree random_one_period(Rng& rng, const OnePeriodConfig& cfg) {
  std::uniform_int_distribution<int> child_count(cfg.min_children, cfg.max_children);
  std::uniform_int_distribution<int> extreme_count(1, cfg.max_extremes);
  const long lo = std::lround(cfg.atom_lo / cfg.lattice);
  const long hi = std::lround(cfg.atom_hi / cfg.lattice);
  std::uniform_int_distribution<long> atom(lo, hi);

  int m = child_count(rng);
  Mat prices;
  for (int c = 0; c < m; ++c) {
    Vec p(cfg.assets);
    for (int a = 0; a < cfg.assets; ++a) p[a] = cfg.base_price + atom(rng) * cfg.lattice;
    prices.push_back(std::move(p));
  }
  Mat extremes;
  int k = extreme_count(rng);
  for (int e = 0; e < k; ++e) extremes.push_back(random_extreme(rng, m, cfg.zero_chance));
  Vec root(cfg.assets, cfg.base_price);
  return one_period_tree(cfg.assets, prices, root, extremes);
}

// ---------------------------------------------------------------------------
// Multi-period trees

struct TreeConfig {
  int horizon = 2;
  int assets = 1;
  int min_children = 2;
  int max_children = 3;
  int max_extremes = 3;
  double zero_chance = 0.1;
  double base_price = 4.0;   // additive dyadic moves keep prices positive
  double lattice = 0.125;
  double atom_lo = -1.0;
  double atom_hi = 1.5;
};

inline ScenarioTree random_tree(Rng& rng, const TreeConfig& cfg) {
  std::uniform_int_distribution<int> child_count(cfg.min_children, cfg.max_children);
  std::uniform_int_distribution<int> extreme_count(1, cfg.max_extremes);
  const long lo = std::lround(cfg.atom_lo / cfg.lattice);
  const long hi = std::lround(cfg.atom_hi / cfg.lattice);
  std::uniform_int_distribution<long> atom(lo, hi);

  ScenarioTree tree;
  tree.horizon = cfg.horizon;
  tree.asset_count = cfg.assets;
  tree.root = 0;
  tree.nodes.resize(1);
  tree.nodes[0].time = 0;
  tree.nodes[0].price = Vec(cfg.assets, cfg.base_price);

  std::vector<NodeId> frontier = {0};
  for (int t = 0; t < cfg.horizon; ++t) {
    std::vector<NodeId> next;
    for (NodeId n : frontier) {
      int m = child_count(rng);
      for (int c = 0; c < m; ++c) {
        NodeId id = static_cast<NodeId>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[id].parent = n;
        tree.nodes[id].time = t + 1;
        Vec p(cfg.assets);
        for (int a = 0; a < cfg.assets; ++a) {
          // stay positive: clamp the lattice move so price >= lattice
          double move = atom(rng) * cfg.lattice;
          double floor_move = cfg.lattice - tree.nodes[n].price[a];
          p[a] = tree.nodes[n].price[a] + std::max(move, floor_move);
        }
        tree.nodes[id].price = std::move(p);
        tree.nodes[n].children.push_back(id);
        next.push_back(id);
      }
      int k = extreme_count(rng);
      for (int e = 0; e < k; ++e) {
        tree.nodes[n].measures.extremes.push_back(random_extreme(rng, m, cfg.zero_chance));
      }
    }
    frontier = std::move(next);
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Independent whole-tree arbitrage search on a dyadic holdings lattice.
// Gains of lattice holdings against lattice price moves are exact in floats,
// so the zero comparisons below are exact, not tolerances.

struct LatticeArbitrage {
  bool found = false;
  double best_gain = 0.0;  // largest terminal wealth among all-nonnegative plans
};

namespace detail {

struct ArbSearch {
  const ScenarioTree* tree;
  const std::vector<char>* nonpolar;
  std::vector<NodeId> decisions;
  double step;
  long span;
  Vec wealth;
  LatticeArbitrage result;

  void run(std::size_t depth) {
    if (depth == decisions.size()) {
      double best = 0.0;
      for (NodeId n = 0; n < static_cast<NodeId>(tree->nodes.size()); ++n) {
        if (!(*nonpolar)[n] || !tree->is_terminal(n)) continue;
        if (wealth[n] < 0.0) return;  // exact: some branch lost money
        best = std::max(best, wealth[n]);
      }
      if (best > 0.0) {
        result.found = true;
        result.best_gain = std::max(result.best_gain, best);
      }
      return;
    }
    NodeId n = decisions[depth];
    const rum::Node& node = tree->nodes[n];
    int d = tree->asset_count;
    Vec h(d, 0.0);
    std::vector<long> idx(d, -span);
    for (;;) {
      for (int a = 0; a < d; ++a) h[a] = idx[a] * step;
      bool viable = true;
      for (NodeId c : node.children) {
        if (!(*nonpolar)[c]) continue;
        double gain = 0.0;
        for (int a = 0; a < d; ++a) gain += h[a] * (tree->price(c)[a] - tree->price(n)[a]);
        wealth[c] = wealth[n] + gain;
        if (wealth[c] < 0.0 && tree->is_terminal(c)) viable = false;
      }
      if (viable) run(depth + 1);
      int a = d - 1;
      while (a >= 0 && ++idx[a] > span) { idx[a] = -span; --a; }
      if (a < 0) break;
    }
  }
};

}  // namespace detail

inline LatticeArbitrage lattice_arbitrage_search(const ScenarioTree& tree, double step = 0.25,
                                                 long span = 4) {
  std::vector<char> nonpolar = rum::nonpolar_mask(tree);
  detail::ArbSearch s;
  s.tree = &tree;
  s.nonpolar = &nonpolar;
  s.step = step;
  s.span = span;
  s.wealth.assign(tree.nodes.size(), 0.0);
  for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
    if (nonpolar[n] && !tree.is_terminal(n)) s.decisions.push_back(n);
  }
  std::stable_sort(s.decisions.begin(), s.decisions.end(), [&](NodeId a, NodeId b) {
    return tree.nodes[a].time < tree.nodes[b].time;
  });
  s.run(0);
  return s.result;
}

// ---------------------------------------------------------------------------
// Independent per-fixed-strategy worst case by backward greedy minimization
// (contrast with the oracle's full selector enumeration).

inline double greedy_worst_case(const ScenarioTree& tree, const rum::Strategy& strategy,
                                const rum::UtilitySpec& utility, double x0) {
  std::vector<char> nonpolar = rum::nonpolar_mask(tree);
  Vec wealth(tree.nodes.size(), 0.0);
  wealth[tree.root] = x0;
  std::vector<std::vector<NodeId>> slices = rum::nodes_by_time(tree);
  for (const auto& slice : slices) {
    for (NodeId n : slice) {
      if (!nonpolar[n] || tree.is_terminal(n)) continue;
      const Vec* h = strategy.at(n);
      for (NodeId c : tree.nodes[n].children) {
        double gain = 0.0;
        if (h != nullptr) {
          for (int a = 0; a < tree.asset_count; ++a) {
            gain += (*h)[a] * (tree.price(c)[a] - tree.price(n)[a]);
          }
        }
        wealth[c] = wealth[n] + gain;
      }
    }
  }
  Vec val(tree.nodes.size(), 0.0);
  for (int t = tree.horizon; t >= 0; --t) {
    for (NodeId n : slices[t]) {
      if (!nonpolar[n]) continue;
      if (tree.is_terminal(n)) {
        val[n] = rum::evaluate_utility(utility, wealth[n], tree.nodes[n].endowment);
        continue;
      }
      double worst = std::numeric_limits<double>::infinity();
      for (const Vec& e : tree.nodes[n].measures.extremes) {
        double acc = 0.0;
        bool floored = false;
        for (std::size_t c = 0; c < tree.nodes[n].children.size(); ++c) {
          if (e[c] <= 0.0) continue;
          double v = val[tree.nodes[n].children[c]];
          if (rum::is_floor(v)) { floored = true; break; }
          acc += e[c] * v;
        }
        worst = std::min(worst, floored ? rum::kValueFloor : acc);
      }
      val[n] = worst;
    }
  }
  return val[tree.root];
}

// ---------------------------------------------------------------------------
// Random admissible strategies (interior, so utilities stay finite)

inline rum::Strategy random_admissible_strategy(Rng& rng, const ScenarioTree& tree, double x0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<char> nonpolar = rum::nonpolar_mask(tree);
  rum::Strategy strategy;
  strategy.holdings.assign(tree.nodes.size(), Vec());
  Vec wealth(tree.nodes.size(), 0.0);
  wealth[tree.root] = x0;
  for (const auto& slice : rum::nodes_by_time(tree)) {
    for (NodeId n : slice) {
      if (!nonpolar[n] || tree.is_terminal(n)) continue;
      Mat inc = charged_increments(tree, n);
      double scale = increment_scale(inc);
      const double w = wealth[n];
      Vec pick(tree.asset_count, 0.0);
      if (scale > 0.0 && w > 0.0) {
        for (int attempt = 0; attempt < 60; ++attempt) {
          Vec h(tree.asset_count);
          double mag = unit(rng) * w / scale;
          for (int a = 0; a < tree.asset_count; ++a) h[a] = gauss(rng) * mag;
          bool interior = true;
          for (const Vec& v : inc) {
            if (w + rum::dot(h, v) < 0.05 * w) { interior = false; break; }
          }
          if (interior) { pick = h; break; }
        }
      }
      strategy.holdings[n] = pick;
      const rum::Node& node = tree.nodes[n];
      for (NodeId c : node.children) {
        double gain = 0.0;
        for (int a = 0; a < tree.asset_count; ++a) {
          gain += pick[a] * (tree.price(c)[a] - tree.price(n)[a]);
        }
        wealth[c] = wealth[n] + gain;
      }
    }
  }
  return strategy;
}

}  // namespace testsupport
