#include "rum/cli.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "rum/dp.hpp"
#include "rum/errors.hpp"
#include "rum/io.hpp"
#include "rum/lab.hpp"
#include "rum/na.hpp"
#include "rum/oracle.hpp"

namespace rum::cli {
namespace {

std::string vec_text(const Vec& v) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << io::format_double(v[i]);
  out << "]";
  return out.str();
}

int run_check_na(const std::string& file) {
  io::Market market = io::load_market(file);
  auto results = na::check_tree(market.tree);
  bool all = true;
  for (const auto& [node, r] : results) {
    if (r.holds) {
      std::cout << "node " << node << ": no arbitrage\n";
    } else {
      all = false;
      std::cout << "node " << node << ": ARBITRAGE witness "
                << (r.witness ? vec_text(*r.witness) : "[]") << "\n";
    }
  }
  std::cout << (all ? "tree: no arbitrage\n" : "tree: arbitrage found\n");
  return all ? 0 : 1;
}

int run_margin(const std::string& file) {
  io::Market market = io::load_market(file);
  std::vector<char> nonpolar = nonpolar_mask(market.tree);
  for (NodeId n = 0; n < static_cast<NodeId>(market.tree.nodes.size()); ++n) {
    if (!nonpolar[n] || market.tree.is_terminal(n)) continue;
    na::SupportData support = na::compute_support(market.tree, n);
    double margin = na::nondegeneracy_margin(support);
    std::cout << "node " << n << ": margin ";
    if (std::isfinite(margin)) {
      std::cout << io::format_double(margin);
    } else {
      std::cout << "unconstrained (empty span)";
    }
    std::cout << " span-dim " << support.dim() << "\n";
  }
  return 0;
}

io::SolveReport build_report(const io::Market& market, const ValueField& field,
                             const ExtractResult& extract, const InequalityReport& chain,
                             double x, double tol, int knots, bool allow_unbounded) {
  io::SolveReport r;
  r.x0 = x;
  r.tol = tol;
  r.grid_knots = knots;
  r.allow_unbounded = allow_unbounded;
  r.certified_value = extract.value;
  r.grid_value = field.value_at(market.tree.root, x);
  r.eps_grid = field.eps_grid;
  r.wealth_bound = field.wealth_bound;
  r.max_wealth = extract.max_wealth;
  auto na_results = na::check_tree(market.tree);
  r.na_holds = na::all_hold(na_results);
  for (const auto& [node, res] : na_results) r.na.push_back({node, res.holds});
  for (const auto& [node, margin] : field.margins) {
    if (std::isfinite(margin)) r.margins.push_back({node, margin});
  }
  for (NodeId n = 0; n < static_cast<NodeId>(extract.strategy.holdings.size()); ++n) {
    if (const Vec* h = extract.strategy.at(n)) r.strategy.push_back({n, *h});
  }
  r.chain = chain.chain;
  r.chain_eps = chain.eps;
  r.chain_nonincreasing = chain.nonincreasing;
  r.chain_spread = chain.spread;
  r.slice_eps = field.slice_eps;
  return r;
}

int run_solve(const std::string& file, double x, int knots, double tol, bool allow_unbounded,
              const std::string& out_path) {
  io::Market market = io::load_market(file);
  WealthGridSpec grid;
  grid.x0 = x;
  grid.knots = knots;
  grid.allow_unbounded = allow_unbounded;
  ValueField field = backward_induction(market.tree, market.utility, grid, tol);
  ExtractResult extract = extract_strategy(market.tree, field, x, tol);
  InequalityReport chain = verify_value_inequalities(market.tree, field, extract.strategy, x);
  io::SolveReport report =
      build_report(market, field, extract, chain, x, tol, knots, allow_unbounded);
  io::write_file(out_path, io::serialize_report(report));
  std::cout << "value " << io::format_double(report.certified_value) << " (grid estimate "
            << io::format_double(report.grid_value) << ", eps_grid "
            << io::format_double(report.eps_grid) << ")\n";
  std::cout << "report written to " << out_path << "\n";
  return 0;
}

int run_oracle(const std::string& file, double x, double step) {
  io::Market market = io::load_market(file);
  oracle::GridSpec spec;
  spec.step = step;
  oracle::BruteForce brute = oracle::brute_force_value(market.tree, market.utility, x, spec);

  WealthGridSpec grid;
  grid.x0 = x;
  grid.allow_unbounded = !market.utility.bounded_above();
  ValueField field = backward_induction(market.tree, market.utility, grid);
  ExtractResult extract = extract_strategy(market.tree, field, x);

  double diff = std::abs(brute.value - extract.value);
  std::cout << "grid-search value " << io::format_double(brute.value) << " ("
            << brute.strategies << " strategies)\n";
  std::cout << "recursion value   " << io::format_double(field.value_at(market.tree.root, x))
            << " (eps_grid " << io::format_double(field.eps_grid) << ")\n";
  std::cout << "certified value   " << io::format_double(extract.value) << "\n";
  std::cout << "difference        " << io::format_double(diff) << "\n";
  if (brute.bounded_warning) {
    std::cout << "warning: a feasible grid point touched the search box; the grid value may be "
                 "understated\n";
  }
  return 0;
}

int run_value_function(const std::string& file, int node, const std::string& csv_path, double x,
                       int knots, double tol, bool allow_unbounded) {
  io::Market market = io::load_market(file);
  WealthGridSpec grid;
  grid.x0 = x;
  grid.knots = knots;
  grid.allow_unbounded = allow_unbounded;
  ValueField field = backward_induction(market.tree, market.utility, grid, tol);
  if (node < 0 || static_cast<std::size_t>(node) >= field.value.size() ||
      !field.value[node].has_value()) {
    throw input_error("node " + std::to_string(node) +
                      " has no stored value function (terminal, polar or out of range)");
  }
  const ConcavePLF& plf = *field.value[node];
  std::ostringstream csv;
  csv << "wealth,value\n";
  for (std::size_t i = 0; i < plf.knots().size(); ++i) {
    csv << io::format_double(plf.knots()[i]) << "," << io::format_double(plf.values()[i]) << "\n";
  }
  io::write_file(csv_path, csv.str());
  std::cout << "wrote " << plf.knots().size() << " knots for node " << node << " to " << csv_path
            << "\n";
  return 0;
}

int run_lab_truncation(const std::vector<int>& levels, const std::string& csv_path, bool variant,
                       double x, double tol) {
  lab::TruncationStudy study =
      variant ? lab::random_utility_variant(levels, x, tol)
              : lab::run_nonexistence_study(levels, UtilitySpec::power(0.5), x, tol);
  std::ostringstream csv;
  csv << "level,h1,h2,value,value_at_limit,gap\n";
  for (const lab::TruncationRow& row : study.rows) {
    csv << row.level << "," << io::format_double(row.h1) << "," << io::format_double(row.h2)
        << "," << io::format_double(row.value) << "," << io::format_double(row.value_at_limit)
        << "," << io::format_double(row.gap) << "\n";
  }
  if (!csv_path.empty()) io::write_file(csv_path, csv.str());
  std::cout << csv.str();
  return 0;
}

int run_lab_existence(int seeds, std::uint64_t seed) {
  lab::ExistenceReport report = lab::one_dim_existence_demo(seed, seeds);
  std::cout << "instances " << report.instances << ", attained " << report.attained
            << ", rejected by arbitrage filter " << report.rejected_by_na
            << ", rejected as degenerate " << report.rejected_degenerate << "\n";
  std::cout << "worst shortfall " << io::format_double(report.worst_shortfall) << "\n";
  if (!report.all_attained()) {
    throw numerical_error("the solver missed the lattice supremum on " +
                          std::to_string(report.instances - report.attained) + " instances");
  }
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"robust utility maximization on scenario trees"};
  app.require_subcommand(1);

  std::string file, out_path, csv_path;
  double x = 1.0, tol = 1e-8, step = 0.0625;
  int knots = 257, node = 0, seeds = 100;
  std::uint64_t seed = 20260814;
  bool allow_unbounded = false, variant = false;
  std::vector<int> levels = {1, 2, 4, 8};

  CLI::App* check = app.add_subcommand("check-na", "arbitrage check per node");
  check->add_option("file", file, "market file")->required();

  CLI::App* solve = app.add_subcommand("solve", "value recursion and strategy extraction");
  solve->add_option("file", file, "market file")->required();
  solve->add_option("--x", x, "initial capital")->required();
  solve->add_option("--grid", knots, "wealth grid knots");
  solve->add_option("--tol", tol, "solver tolerance");
  solve->add_flag("--allow-unbounded", allow_unbounded, "accept utilities unbounded above");
  solve->add_option("--out", out_path, "report path")->required();

  CLI::App* orc = app.add_subcommand("oracle", "exhaustive grid-search comparison");
  orc->add_option("file", file, "market file")->required();
  orc->add_option("--x", x, "initial capital")->required();
  orc->add_option("--step", step, "holdings lattice step");

  CLI::App* vf = app.add_subcommand("value-function", "dump one node's value function as CSV");
  vf->add_option("file", file, "market file")->required();
  vf->add_option("--node", node, "node id")->required();
  vf->add_option("--csv", csv_path, "output CSV path")->required();
  vf->add_option("--x", x, "initial capital");
  vf->add_option("--grid", knots, "wealth grid knots");
  vf->add_option("--tol", tol, "solver tolerance");
  vf->add_flag("--allow-unbounded", allow_unbounded, "accept utilities unbounded above");

  CLI::App* lab_cmd = app.add_subcommand("lab", "demonstration instances");
  lab_cmd->require_subcommand(1);
  CLI::App* trunc = lab_cmd->add_subcommand("truncation", "heavy-tail truncation study");
  trunc->add_option("--levels", levels, "truncation levels")->delimiter(',');
  trunc->add_option("--csv", csv_path, "output CSV path");
  trunc->add_flag("--variant", variant, "single-asset random-utility variant");
  trunc->add_option("--x", x, "initial capital");
  trunc->add_option("--tol", tol, "solver tolerance");
  CLI::App* exist = lab_cmd->add_subcommand("existence", "one-asset attainment demo");
  exist->add_option("--seeds", seeds, "number of accepted instances");
  exist->add_option("--seed", seed, "generator seed");

  CLI::App* margin = app.add_subcommand("margin", "nondegeneracy margins per node");
  margin->add_option("file", file, "market file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR 2 " << e.what() << "\n";
    return 2;
  }

  try {
    if (check->parsed()) return run_check_na(file);
    if (solve->parsed()) return run_solve(file, x, knots, tol, allow_unbounded, out_path);
    if (orc->parsed()) return run_oracle(file, x, step);
    if (vf->parsed()) {
      return run_value_function(file, node, csv_path, x, knots, tol, allow_unbounded);
    }
    if (lab_cmd->parsed()) {
      if (trunc->parsed()) return run_lab_truncation(levels, csv_path, variant, x, tol);
      if (exist->parsed()) return run_lab_existence(seeds, seed);
    }
    if (margin->parsed()) return run_margin(file);
    std::cerr << "ERROR 2 no subcommand\n";
    return 2;
  } catch (const arbitrage_error& e) {
    std::cerr << "ERROR 1 " << e.what() << "\n";
    return 1;
  } catch (const input_error& e) {
    std::cerr << "ERROR 2 " << e.what() << "\n";
    return 2;
  } catch (const cap_error& e) {
    std::cerr << "ERROR 2 " << e.what() << "\n";
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "ERROR 3 " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "ERROR 3 " << e.what() << "\n";
    return 3;
  }
}

}  // namespace rum::cli
