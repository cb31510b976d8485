#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "rum/cli.hpp"
#include "rum/errors.hpp"
#include "rum/io.hpp"

using namespace rum;
using nlohmann::json;

namespace {

const char* kBinomialMarket = R"({
  "version": 1,
  "d": 1,
  "T": 1,
  "utility": {"family": "log"},
  "nodes": [
    {"id": 0, "t": 0, "S": [1], "children": [1, 2], "measures": [[0.5, 0.5]]},
    {"id": 1, "t": 1, "S": [0.5]},
    {"id": 2, "t": 1, "S": [2]}
  ]
}
)";

bool parse_fails(const std::string& text, const std::string& needle) {
  try {
    io::parse_market_file(text);
  } catch (const input_error& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

std::string tmp_path(const std::string& name) {
  static int counter = 0;
  std::filesystem::path dir = std::filesystem::temp_directory_path();
  return (dir / ("rum_io_" + std::to_string(++counter) + "_" + name)).string();
}

struct StreamCapture {
  std::ostringstream out, err;
  std::streambuf* saved_out;
  std::streambuf* saved_err;
  StreamCapture()
      : saved_out(std::cout.rdbuf(out.rdbuf())), saved_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~StreamCapture() {
    std::cout.rdbuf(saved_out);
    std::cerr.rdbuf(saved_err);
  }
};

int run_cli(std::vector<std::string> args, std::string* out = nullptr,
            std::string* err = nullptr) {
  args.insert(args.begin(), "rum_cli");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  StreamCapture capture;
  int code = cli::dispatch(static_cast<int>(argv.size()), argv.data());
  if (out) *out = capture.out.str();
  if (err) *err = capture.err.str();
  return code;
}

}  // namespace

TEST_CASE("format_double is a shortest-faithful round trip") {
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(-2.0) == "-2");
  CHECK(io::format_double(0.1) == "0.10000000000000001");

  Vec tricky = {0.1,           1.0 / 3.0,        5e-324,         2.2250738585072014e-308,
                1e308,         9007199254740992.0, 3.141592653589793, 1e-17,
                -0.3333333333333333, 123456789.123456789};
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    double v = std::ldexp(static_cast<double>(rng()) - 9.2e18,
                          static_cast<int>(rng() % 120) - 60);
    if (std::isfinite(v)) tricky.push_back(v);
  }
  for (double v : tricky) {
    std::string text = io::format_double(v);
    CHECK(std::strtod(text.c_str(), nullptr) == v);
  }
}

TEST_CASE("market parser accepts the minimal schema") {
  io::Market market = io::parse_market_file(kBinomialMarket);
  CHECK(market.tree.root == 0);
  CHECK(market.tree.horizon == 1);
  CHECK(market.tree.asset_count == 1);
  REQUIRE(market.tree.nodes.size() == 3);
  CHECK(market.tree.nodes[0].price == Vec{1.0});
  CHECK(market.tree.nodes[1].price == Vec{0.5});
  CHECK(market.tree.nodes[2].price == Vec{2.0});
  CHECK(market.tree.nodes[1].parent == 0);
  CHECK(market.tree.nodes[2].parent == 0);
  REQUIRE(market.tree.nodes[0].measures.extremes.size() == 1);
  CHECK(market.tree.nodes[0].measures.extremes[0] == Vec{0.5, 0.5});
  CHECK(market.utility.family() == UtilityFamily::Log);
  CHECK_FALSE(market.utility.endowment_enabled());
}

TEST_CASE("market parser rejects malformed input with located messages") {
  const json base = json::parse(kBinomialMarket);

  CHECK(parse_fails("nonsense", "not valid JSON"));
  CHECK(parse_fails("[1, 2]", "must contain a JSON object"));

  json j = base;
  j["extra"] = 1;
  CHECK(parse_fails(j.dump(), "unknown key \"extra\""));

  j = base;
  j["version"] = 2;
  CHECK(parse_fails(j.dump(), "unsupported market file version"));
  j["version"] = "1";
  CHECK(parse_fails(j.dump(), "must be an integer"));

  j = base;
  j["d"] = 0;
  CHECK(parse_fails(j.dump(), "asset count"));
  j["d"] = 17;
  CHECK(parse_fails(j.dump(), "asset count"));

  j = base;
  j["T"] = 0;
  CHECK(parse_fails(j.dump(), "horizon"));

  j = base;
  j.erase("nodes");
  CHECK(parse_fails(j.dump(), "\"nodes\""));
  j["nodes"] = json::array();
  CHECK(parse_fails(j.dump(), "\"nodes\""));

  j = base;
  j["nodes"][1]["price"] = 1.0;
  CHECK(parse_fails(j.dump(), "unknown key \"price\""));

  j = base;
  j["nodes"][1]["id"] = 2;
  CHECK(parse_fails(j.dump(), "duplicate id"));
  j["nodes"][1]["id"] = 7;
  CHECK(parse_fails(j.dump(), "out of range"));

  j = base;
  j["nodes"][0]["children"] = {1, 9};
  CHECK(parse_fails(j.dump(), "child id 9 out of range"));

  j = base;
  j["nodes"][2]["children"] = {1};
  CHECK(parse_fails(j.dump(), "two parents"));

  j = base;
  j["nodes"][0]["children"] = {2};
  CHECK(parse_fails(j.dump(), "multiple root nodes"));

  j = base;
  j["nodes"][0].erase("measures");
  CHECK(parse_fails(j.dump(), "needs \"measures\""));

  j = base;
  j["nodes"][1]["measures"] = {{1.0}};
  CHECK(parse_fails(j.dump(), "terminal node cannot carry \"measures\""));

  j = base;
  j["nodes"][0]["measures"] = {{0.5, -0.5}};
  CHECK(parse_fails(j.dump(), "negative probability"));

  j = base;
  j["nodes"][0]["measures"] = {{0.5, 0.4}};
  CHECK(parse_fails(j.dump(), "invalid market"));

  j = base;
  j.erase("utility");
  CHECK(parse_fails(j.dump(), "needs a \"utility\" block"));
  j["utility"] = {{"family", "cubic"}};
  CHECK(parse_fails(j.dump(), "unknown utility family"));
  j["utility"] = {{"family", "log"}, {"gamma", 0.5}};
  CHECK(parse_fails(j.dump(), "does not take \"gamma\""));
  j["utility"] = {{"family", "power"}};
  CHECK(parse_fails(j.dump(), "missing key \"gamma\""));
  j["utility"] = {{"family", "power"}, {"gamma", 0.0}};
  CHECK(parse_fails(j.dump(), "invalid utility parameters"));

  j = base;
  j["utility"]["endowments"] = 3;
  CHECK(parse_fails(j.dump(), "must map node ids"));
  j["utility"]["endowments"] = {{"abc", 1.0}};
  CHECK(parse_fails(j.dump(), "not a node id"));
  j["utility"]["endowments"] = {{"99", 1.0}};
  CHECK(parse_fails(j.dump(), "unknown node 99"));
  j["utility"]["endowments"] = {{"0", 1.0}};
  CHECK(parse_fails(j.dump(), "non-terminal node"));
  j["utility"]["endowments"] = {{"1", "big"}};
  CHECK(parse_fails(j.dump(), "must be a number"));
}

TEST_CASE("market serialization is stable and round trips") {
  io::Market market = io::parse_market_file(kBinomialMarket);
  CHECK(io::serialize_market(market) == kBinomialMarket);

  // Two periods, a polar branch, names, a piecewise utility and endowments.
  io::Market rich;
  ScenarioTree& tree = rich.tree;
  tree.horizon = 2;
  tree.asset_count = 1;
  tree.root = 0;
  tree.nodes.resize(7);
  auto setup = [&](NodeId n, int t, double price, std::vector<NodeId> children, Mat extremes) {
    tree.nodes[n].time = t;
    tree.nodes[n].price = {price};
    tree.nodes[n].children = children;
    tree.nodes[n].measures.extremes = std::move(extremes);
    for (NodeId c : children) tree.nodes[c].parent = n;
  };
  setup(0, 0, 4.0, {1, 2}, {{0.5, 0.5}, {0.25, 0.75}});
  setup(1, 1, 3.0, {3, 4}, {{0.5, 0.5}});
  setup(2, 1, 5.0, {5, 6}, {{1.0, 0.0}});
  setup(3, 2, 2.0, {}, {});
  setup(4, 2, 4.5, {}, {});
  setup(5, 2, 4.0, {}, {});
  setup(6, 2, 7.0, {}, {});
  tree.nodes[0].name = "root";
  tree.nodes[6].name = "dead-branch";
  tree.nodes[3].endowment = 0.25;
  tree.nodes[6].endowment = -0.5;
  rich.utility = UtilitySpec::piecewise({0.5, 1.0, 2.0}, {-1.0, 0.0, 1.0});
  rich.utility.enable_endowment(true);

  std::string text = io::serialize_market(rich);
  io::Market parsed = io::parse_market_file(text);
  CHECK(parsed.tree.horizon == 2);
  CHECK(parsed.tree.root == 0);
  CHECK(parsed.tree.nodes[0].name == "root");
  CHECK(parsed.tree.nodes[6].name == "dead-branch");
  CHECK(parsed.tree.nodes[2].measures.extremes[0] == Vec{1.0, 0.0});
  CHECK(parsed.tree.nodes[3].endowment == 0.25);
  CHECK(parsed.tree.nodes[6].endowment == -0.5);
  CHECK(parsed.utility.family() == UtilityFamily::PiecewiseLinear);
  CHECK(parsed.utility.endowment_enabled());
  CHECK(parsed.utility.plf().knots() == Vec{0.5, 1.0, 2.0});
  CHECK(parsed.utility.plf().values() == Vec{-1.0, 0.0, 1.0});
  CHECK(io::serialize_market(parsed) == text);

  // The scalar-parameter families keep their parameters through the cycle.
  io::Market power = io::parse_market_file(kBinomialMarket);
  power.utility = UtilitySpec::power(0.3);
  io::Market power2 = io::parse_market_file(io::serialize_market(power));
  CHECK(power2.utility.family() == UtilityFamily::Power);
  CHECK(power2.utility.gamma() == 0.3);

  power.utility = UtilitySpec::exponential(2.5);
  io::Market expo = io::parse_market_file(io::serialize_market(power));
  CHECK(expo.utility.family() == UtilityFamily::ExponentialBounded);
  CHECK(expo.utility.alpha() == 2.5);
}

TEST_CASE("solve reports round trip byte for byte") {
  io::SolveReport r;
  r.x0 = 0.1;
  r.tol = 1e-17;
  r.grid_knots = 257;
  r.allow_unbounded = true;
  r.certified_value = 1.0 / 3.0;
  r.grid_value = 2.5e-308;
  r.eps_grid = 5e-324;
  r.wealth_bound = 1e308;
  r.max_wealth = 6.02214076e23;
  r.na_holds = true;
  r.na = {{0, true}, {1, false}};
  r.margins = {{0, 3.141592653589793}};
  r.strategy = {{0, Vec{0.30000000000000004, -1.5}}, {2, Vec{9007199254740992.0}}};
  r.chain = {0.1177830356563834, 0.1177830356563834};
  r.chain_eps = 1.1e-4;
  r.chain_nonincreasing = true;
  r.chain_spread = 1e-9;
  r.slice_eps = {1e-6, 2e-6};

  std::string text = io::serialize_report(r);
  io::SolveReport parsed = io::parse_report(text);
  CHECK(parsed.x0 == r.x0);
  CHECK(parsed.tol == r.tol);
  CHECK(parsed.grid_knots == r.grid_knots);
  CHECK(parsed.allow_unbounded == r.allow_unbounded);
  CHECK(parsed.certified_value == r.certified_value);
  CHECK(parsed.grid_value == r.grid_value);
  CHECK(parsed.eps_grid == r.eps_grid);
  CHECK(parsed.wealth_bound == r.wealth_bound);
  CHECK(parsed.max_wealth == r.max_wealth);
  REQUIRE(parsed.na.size() == 2);
  CHECK(parsed.na[1].node == 1);
  CHECK_FALSE(parsed.na[1].holds);
  REQUIRE(parsed.strategy.size() == 2);
  CHECK(parsed.strategy[0].h == r.strategy[0].h);
  CHECK(parsed.strategy[1].node == 2);
  CHECK(parsed.chain == r.chain);
  CHECK(parsed.slice_eps == r.slice_eps);
  CHECK(io::serialize_report(parsed) == text);

  CHECK_THROWS_AS(io::parse_report("{}"), input_error);
  CHECK_THROWS_AS(io::parse_report("{\"report\": \"margin\"}"), input_error);
  json j = json::parse(text);
  j["chain"]["extra"] = 0;
  CHECK_THROWS_AS(io::parse_report(j.dump()), input_error);
}

TEST_CASE("file helpers create and reload markets") {
  std::string path = tmp_path("market.json");
  io::write_file(path, kBinomialMarket);
  io::Market market = io::load_market(path);
  CHECK(market.tree.nodes.size() == 3);
  CHECK(io::read_file(path) == kBinomialMarket);
  CHECK_THROWS_AS(io::load_market(path + ".missing"), input_error);
  std::filesystem::remove(path);
}

TEST_CASE("cli dispatches subcommands with documented exit codes") {
  std::string market_path = tmp_path("cli_market.json");
  io::write_file(market_path, kBinomialMarket);

  std::string out, err;
  CHECK(run_cli({"check-na", market_path}, &out) == 0);
  CHECK(out.find("tree: no arbitrage") != std::string::npos);

  // One-sided market: both branches rise, so the checker exits with 1.
  json bad = json::parse(kBinomialMarket);
  bad["nodes"][1]["S"] = {1.0};
  bad["nodes"][2]["S"] = {1.5};
  std::string bad_path = tmp_path("cli_arbitrage.json");
  io::write_file(bad_path, bad.dump());
  CHECK(run_cli({"check-na", bad_path}, &out) == 1);
  CHECK(out.find("ARBITRAGE") != std::string::npos);

  CHECK(run_cli({"check-na", market_path + ".gone"}, &out, &err) == 2);
  CHECK(err.rfind("ERROR 2 ", 0) == 0);

  CHECK(run_cli({"frobnicate"}, &out, &err) == 2);
  CHECK(err.rfind("ERROR 2 ", 0) == 0);

  // Log utility is unbounded above: solving needs the explicit opt-in.
  std::string report_path = tmp_path("report.json");
  CHECK(run_cli({"solve", market_path, "--x", "1", "--out", report_path}, &out, &err) == 2);
  CHECK(err.rfind("ERROR 2 ", 0) == 0);
  CHECK(run_cli({"solve", market_path, "--x", "1", "--allow-unbounded", "--out", report_path},
                &out) == 0);
  std::string first = io::read_file(report_path);
  io::SolveReport report = io::parse_report(first);
  CHECK(report.na_holds);
  double exact = 0.5 * std::log(1.125);  // one-period log optimum at h = 1/2
  CHECK(report.certified_value <= exact + 1e-9);
  CHECK(report.certified_value >= exact - report.eps_grid - 1e-3);

  std::string report2_path = tmp_path("report2.json");
  CHECK(run_cli({"solve", market_path, "--x", "1", "--allow-unbounded", "--out", report2_path},
                &out) == 0);
  CHECK(io::read_file(report2_path) == first);  // determinism, byte for byte

  CHECK(run_cli({"oracle", market_path, "--x", "1", "--step", "0.0625"}, &out) == 0);
  CHECK(out.find("difference") != std::string::npos);

  std::string csv_path = tmp_path("vf.csv");
  CHECK(run_cli({"value-function", market_path, "--node", "0", "--csv", csv_path,
                 "--allow-unbounded"}, &out) == 0);
  std::string csv = io::read_file(csv_path);
  CHECK(csv.rfind("wealth,value\n", 0) == 0);
  CHECK(run_cli({"value-function", market_path, "--node", "1", "--csv", csv_path,
                 "--allow-unbounded"}, &out, &err) == 2);

  std::string lab_csv_path = tmp_path("lab.csv");
  CHECK(run_cli({"lab", "truncation", "--levels", "1,2", "--csv", lab_csv_path}, &out) == 0);
  std::string lab_csv = io::read_file(lab_csv_path);
  CHECK(lab_csv.rfind("level,h1,h2,value,value_at_limit,gap\n", 0) == 0);
  int rows = 0;
  std::istringstream lines(lab_csv);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++rows;
    double gap = std::strtod(line.substr(line.rfind(',') + 1).c_str(), nullptr);
    CHECK(gap > 0.0);
  }
  CHECK(rows == 2);

  CHECK(run_cli({"lab", "existence", "--seeds", "5", "--seed", "99"}, &out) == 0);
  CHECK(out.find("instances 5, attained 5") != std::string::npos);

  CHECK(run_cli({"margin", market_path}, &out) == 0);
  CHECK(out.find("node 0: margin 0.5") != std::string::npos);

  for (const std::string& p : {market_path, bad_path, report_path, report2_path, csv_path,
                               lab_csv_path}) {
    std::filesystem::remove(p);
  }
}
