// Market-file parsing and deterministic report serialization.
#pragma once

#include <string>

#include "rum/model.hpp"

namespace rum::io {

struct Market {
  ScenarioTree tree;
  UtilitySpec utility = UtilitySpec::log_utility();
};

// 17-significant-digit general formatting (trailing zeros stripped). The
// precision makes text -> double -> text the identity, so reports are
// diffable and serialization round trips are byte stable.
std::string format_double(double v);

// Strict JSON market schema: version, d, T, a utility block (family plus its
// parameters, optional terminal endowments keyed by node id), and a node
// array {id, t, S, children, measures, name?}. Unknown keys are rejected;
// the parsed tree must pass validate_tree. Throws input_error with the node
// or field in the message.
Market parse_market_file(const std::string& text);

Market load_market(const std::string& path);

std::string serialize_market(const Market& market);

struct NAEntry {
  NodeId node = -1;
  bool holds = true;
};

struct MarginEntry {
  NodeId node = -1;
  double margin = 0.0;  // empty-span nodes are omitted (their margin is vacuous)
};

struct StrategyEntry {
  NodeId node = -1;
  Vec h;
};

struct SolveReport {
  double x0 = 1.0;
  double tol = 1e-8;
  int grid_knots = 257;
  bool allow_unbounded = false;
  double certified_value = 0.0;  // exact worst case of the extracted strategy
  double grid_value = 0.0;       // root value-function estimate at x0
  double eps_grid = 0.0;
  double wealth_bound = 0.0;
  double max_wealth = 0.0;
  bool na_holds = true;
  std::vector<NAEntry> na;
  std::vector<MarginEntry> margins;
  std::vector<StrategyEntry> strategy;
  Vec chain;
  double chain_eps = 0.0;
  bool chain_nonincreasing = true;
  double chain_spread = 0.0;
  Vec slice_eps;
};

// Deterministic writer: fixed key order, fixed layout, no timestamps.
// parse_report(serialize_report(r)) reserializes to identical bytes.
std::string serialize_report(const SolveReport& report);

SolveReport parse_report(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace rum::io
