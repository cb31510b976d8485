#include "rum/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rum {

int ScenarioTree::child_slot(NodeId p, NodeId c) const {
  const auto& ch = nodes[p].children;
  for (std::size_t i = 0; i < ch.size(); ++i)
    if (ch[i] == c) return static_cast<int>(i);
  return -1;
}

std::vector<char> nonpolar_mask(const ScenarioTree& tree) {
  std::vector<char> keep(tree.nodes.size(), 0);
  if (tree.nodes.empty()) return keep;
  keep[tree.root] = 1;
  // nodes are processed parents-first via time ordering
  for (const auto& slice : nodes_by_time(tree)) {
    for (NodeId n : slice) {
      if (!keep[n] || tree.is_terminal(n)) continue;
      const Node& node = tree.nodes[n];
      for (std::size_t slot = 0; slot < node.children.size(); ++slot) {
        bool charged = false;
        for (const Vec& p : node.measures.extremes)
          if (p[slot] > 0.0) {
            charged = true;
            break;
          }
        if (charged) keep[node.children[slot]] = 1;
      }
    }
  }
  return keep;
}

std::vector<std::vector<NodeId>> nodes_by_time(const ScenarioTree& tree) {
  std::vector<std::vector<NodeId>> slices(tree.horizon + 1);
  for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
    int t = tree.nodes[n].time;
    if (t >= 0 && t <= tree.horizon) slices[t].push_back(n);
  }
  return slices;
}

UtilitySpec UtilitySpec::log_utility() {
  UtilitySpec u;
  u.family_ = UtilityFamily::Log;
  return u;
}

UtilitySpec UtilitySpec::power(double gamma) {
  if (!(gamma > 0.0) || !(gamma < 1.0))
    throw std::invalid_argument("power utility needs gamma in (0, 1)");
  UtilitySpec u;
  u.family_ = UtilityFamily::Power;
  u.gamma_ = gamma;
  return u;
}

UtilitySpec UtilitySpec::exponential(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("exponential utility needs alpha > 0");
  UtilitySpec u;
  u.family_ = UtilityFamily::ExponentialBounded;
  u.alpha_ = alpha;
  return u;
}

UtilitySpec UtilitySpec::piecewise(Vec knots, Vec values) {
  ConcavePLF f(std::move(knots), std::move(values));
  if (!f.is_concave(1e-12) || !f.is_nondecreasing(1e-12))
    throw std::invalid_argument("piecewise utility must be concave and nondecreasing");
  UtilitySpec u;
  u.family_ = UtilityFamily::PiecewiseLinear;
  u.plf_ = std::move(f);
  return u;
}

double UtilitySpec::value(double x) const {
  if (x < 0.0) return kValueFloor;
  switch (family_) {
    case UtilityFamily::Log:
      return x > 0.0 ? std::log(x) : kValueFloor;
    case UtilityFamily::Power:
      return std::pow(x, gamma_);
    case UtilityFamily::ExponentialBounded:
      return 1.0 - std::exp(-alpha_ * x);
    case UtilityFamily::PiecewiseLinear:
      return plf_.eval(x);
  }
  return kValueFloor;
}

double UtilitySpec::derivative(double x) const {
  switch (family_) {
    case UtilityFamily::Log:
      return 1.0 / x;
    case UtilityFamily::Power:
      return gamma_ * std::pow(x, gamma_ - 1.0);
    case UtilityFamily::ExponentialBounded:
      return alpha_ * std::exp(-alpha_ * x);
    case UtilityFamily::PiecewiseLinear:
      return plf_.left_derivative(x);
  }
  return 0.0;
}

double UtilitySpec::second_derivative(double x) const {
  switch (family_) {
    case UtilityFamily::Log:
      return -1.0 / (x * x);
    case UtilityFamily::Power:
      return gamma_ * (gamma_ - 1.0) * std::pow(x, gamma_ - 2.0);
    case UtilityFamily::ExponentialBounded:
      return -alpha_ * alpha_ * std::exp(-alpha_ * x);
    case UtilityFamily::PiecewiseLinear:
      return 0.0;
  }
  return 0.0;
}

bool UtilitySpec::bounded_above() const {
  switch (family_) {
    case UtilityFamily::Log:
    case UtilityFamily::Power:
      return false;
    case UtilityFamily::ExponentialBounded:
      return true;
    case UtilityFamily::PiecewiseLinear:
      return plf_.final_slope() == 0.0;
  }
  return false;
}

double UtilitySpec::upper_bound() const {
  switch (family_) {
    case UtilityFamily::ExponentialBounded:
      return 1.0;
    case UtilityFamily::PiecewiseLinear:
      return plf_.values().back();
    default:
      return std::numeric_limits<double>::infinity();
  }
}

double evaluate_utility(const UtilitySpec& u, double x, double endowment) {
  double arg = u.endowment_enabled() ? x + endowment : x;
  return u.value(arg);
}

namespace {

void check_structure(const ScenarioTree& tree, ValidationReport& report) {
  const auto n_nodes = static_cast<NodeId>(tree.nodes.size());
  auto add = [&](NodeId n, const char* code, std::string msg) {
    report.issues.push_back({n, code, std::move(msg)});
  };

  if (n_nodes == 0) {
    add(-1, "empty", "tree has no nodes");
    return;
  }
  if (tree.root < 0 || tree.root >= n_nodes) {
    add(-1, "root", "root id out of range");
    return;
  }
  if (tree.nodes[tree.root].parent != -1 || tree.nodes[tree.root].time != 0)
    add(tree.root, "root", "root must have no parent and time 0");

  int roots = 0;
  for (NodeId n = 0; n < n_nodes; ++n)
    if (tree.nodes[n].parent == -1) ++roots;
  if (roots != 1) add(-1, "root", "tree must have exactly one parentless node");

  for (NodeId n = 0; n < n_nodes; ++n) {
    const Node& node = tree.nodes[n];
    if (static_cast<int>(node.price.size()) != tree.asset_count)
      add(n, "price-dim", "price vector size differs from asset count");
    if (node.parent >= 0) {
      if (node.parent >= n_nodes) {
        add(n, "parent", "parent id out of range");
        continue;
      }
      if (tree.child_slot(node.parent, n) < 0)
        add(n, "parent", "node is not listed among its parent's children");
      if (node.time != tree.nodes[node.parent].time + 1)
        add(n, "time", "node time must be parent time + 1");
    }
    for (NodeId c : node.children) {
      if (c < 0 || c >= n_nodes) {
        add(n, "child", "child id out of range");
        continue;
      }
      if (tree.nodes[c].parent != n) add(n, "child", "child does not point back to node");
    }
    bool terminal = node.children.empty();
    if (terminal) {
      if (node.time != tree.horizon)
        add(n, "depth", "terminal node not at the horizon");
      if (!node.measures.extremes.empty())
        add(n, "measures", "terminal node carries measures");
    } else {
      if (node.time >= tree.horizon)
        add(n, "depth", "non-terminal node at or beyond the horizon");
      if (node.endowment != 0.0)
        add(n, "endowment", "endowment on a non-terminal node");
      if (node.measures.extremes.empty())
        add(n, "measures", "non-terminal node needs at least one extreme measure");
      for (std::size_t j = 0; j < node.measures.extremes.size(); ++j) {
        const Vec& p = node.measures.extremes[j];
        if (p.size() != node.children.size()) {
          add(n, "measures", "extreme measure length differs from child count");
          continue;
        }
        double sum = 0.0;
        bool negative = false;
        for (double v : p) {
          if (v < 0.0) negative = true;
          sum += v;
        }
        if (negative) add(n, "measures", "extreme measure has a negative entry");
        if (std::fabs(sum - 1.0) > 1e-12)
          add(n, "measures", "extreme measure does not sum to 1 within 1e-12");
      }
    }
  }
}

}  // namespace

ValidationReport validate_tree(const ScenarioTree& tree) {
  ValidationReport report;
  check_structure(tree, report);
  if (!report.ok()) return report;

  // Price sign constraints only bind where the node is charged by some model.
  auto keep = nonpolar_mask(tree);
  for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
    if (!keep[n]) continue;
    for (double s : tree.nodes[n].price)
      if (s < 0.0) {
        report.issues.push_back({n, "price-sign", "negative price at a non-polar node"});
        break;
      }
  }
  return report;
}

std::vector<NodeId> path_to(const ScenarioTree& tree, NodeId n) {
  std::vector<NodeId> path;
  for (NodeId cur = n; cur != -1; cur = tree.nodes[cur].parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

Vec wealth_along_path(const ScenarioTree& tree, const Strategy& strategy, double x0,
                      const std::vector<NodeId>& path) {
  Vec wealth;
  wealth.reserve(path.size());
  wealth.push_back(x0);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    NodeId here = path[k];
    NodeId next = path[k + 1];
    if (tree.nodes[next].parent != here)
      throw std::invalid_argument("wealth_along_path: ids do not form a root-to-leaf path");
    double gain = 0.0;
    if (const Vec* h = strategy.at(here)) {
      for (int a = 0; a < tree.asset_count; ++a)
        gain += (*h)[a] * (tree.nodes[next].price[a] - tree.nodes[here].price[a]);
    }
    wealth.push_back(wealth.back() + gain);
  }
  return wealth;
}

}  // namespace rum
