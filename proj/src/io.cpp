#include "rum/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rum/errors.hpp"

namespace rum::io {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw input_error(msg); }

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) { known = true; break; }
    }
    if (!known) fail("unknown key \"" + item.key() + "\" in " + where);
  }
}

double number_at(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail("missing key \"" + std::string(key) + "\" in " + where);
  const json& v = obj.at(key);
  if (!v.is_number()) fail("key \"" + std::string(key) + "\" in " + where + " must be a number");
  return v.get<double>();
}

int int_at(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail("missing key \"" + std::string(key) + "\" in " + where);
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    fail("key \"" + std::string(key) + "\" in " + where + " must be an integer");
  }
  return v.get<int>();
}

Vec vec_at(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail("missing key \"" + std::string(key) + "\" in " + where);
  const json& v = obj.at(key);
  if (!v.is_array()) fail("key \"" + std::string(key) + "\" in " + where + " must be an array");
  Vec out;
  for (const json& e : v) {
    if (!e.is_number()) fail("array \"" + std::string(key) + "\" in " + where +
                             " must contain numbers only");
    out.push_back(e.get<double>());
  }
  return out;
}

UtilitySpec parse_utility(const json& u, ScenarioTree& tree) {
  if (!u.is_object()) fail("\"utility\" must be an object");
  reject_unknown_keys(u, {"family", "gamma", "alpha", "knots", "values", "endowments"},
                      "utility");
  if (!u.contains("family") || !u.at("family").is_string()) {
    fail("utility needs a string \"family\"");
  }
  std::string family = u.at("family").get<std::string>();

  auto forbid = [&](const char* key) {
    if (u.contains(key)) {
      fail("utility family \"" + family + "\" does not take \"" + key + "\"");
    }
  };

  UtilitySpec spec = UtilitySpec::log_utility();
  try {
    if (family == "log") {
      forbid("gamma"); forbid("alpha"); forbid("knots"); forbid("values");
    } else if (family == "power") {
      forbid("alpha"); forbid("knots"); forbid("values");
      spec = UtilitySpec::power(number_at(u, "gamma", "utility"));
    } else if (family == "exponential") {
      forbid("gamma"); forbid("knots"); forbid("values");
      spec = UtilitySpec::exponential(number_at(u, "alpha", "utility"));
    } else if (family == "piecewise") {
      forbid("gamma"); forbid("alpha");
      spec = UtilitySpec::piecewise(vec_at(u, "knots", "utility"),
                                    vec_at(u, "values", "utility"));
    } else {
      fail("unknown utility family \"" + family + "\"");
    }
  } catch (const std::invalid_argument& e) {
    fail("invalid utility parameters: " + std::string(e.what()));
  }

  if (u.contains("endowments")) {
    const json& endow = u.at("endowments");
    if (!endow.is_object()) fail("\"endowments\" must map node ids to numbers");
    spec.enable_endowment(true);
    for (const auto& item : endow.items()) {
      int id = -1;
      auto [p, ec] = std::from_chars(item.key().data(), item.key().data() + item.key().size(), id);
      if (ec != std::errc() || p != item.key().data() + item.key().size()) {
        fail("endowment key \"" + item.key() + "\" is not a node id");
      }
      if (id < 0 || static_cast<std::size_t>(id) >= tree.nodes.size()) {
        fail("endowment refers to unknown node " + item.key());
      }
      if (!tree.is_terminal(id)) fail("endowment on non-terminal node " + item.key());
      if (!item.value().is_number()) fail("endowment for node " + item.key() + " must be a number");
      tree.nodes[id].endowment = item.value().get<double>();
    }
  }
  return spec;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc()) return "0";
  return std::string(buf, p);
}

Market parse_market_file(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("market file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) fail("market file must contain a JSON object");
  reject_unknown_keys(j, {"version", "d", "T", "utility", "nodes"}, "the market file");

  if (int_at(j, "version", "the market file") != 1) fail("unsupported market file version");
  int d = int_at(j, "d", "the market file");
  int horizon = int_at(j, "T", "the market file");
  if (d < 1 || d > 16) fail("asset count d must be between 1 and 16");
  if (horizon < 1) fail("horizon T must be at least 1");

  if (!j.contains("nodes") || !j.at("nodes").is_array() || j.at("nodes").empty()) {
    fail("the market file needs a nonempty \"nodes\" array");
  }
  const json& jnodes = j.at("nodes");

  Market market;
  market.tree.horizon = horizon;
  market.tree.asset_count = d;
  market.tree.nodes.resize(jnodes.size());

  std::vector<char> seen(jnodes.size(), 0);
  for (const json& jn : jnodes) {
    if (!jn.is_object()) fail("every node must be an object");
    reject_unknown_keys(jn, {"id", "t", "S", "children", "measures", "name"}, "a node");
    int id = int_at(jn, "id", "a node");
    std::string where = "node " + std::to_string(id);
    if (id < 0 || static_cast<std::size_t>(id) >= jnodes.size()) {
      fail(where + ": id out of range (ids must cover 0..n-1)");
    }
    if (seen[id]) fail(where + ": duplicate id");
    seen[id] = 1;

    Node& node = market.tree.nodes[id];
    node.time = int_at(jn, "t", where);
    node.price = vec_at(jn, "S", where);
    if (jn.contains("name")) {
      if (!jn.at("name").is_string()) fail(where + ": \"name\" must be a string");
      node.name = jn.at("name").get<std::string>();
    }
    if (jn.contains("children")) {
      const json& jc = jn.at("children");
      if (!jc.is_array()) fail(where + ": \"children\" must be an array");
      for (const json& c : jc) {
        if (!c.is_number_integer()) fail(where + ": child ids must be integers");
        int cid = c.get<int>();
        if (cid < 0 || static_cast<std::size_t>(cid) >= jnodes.size()) {
          fail(where + ": child id " + std::to_string(cid) + " out of range");
        }
        node.children.push_back(cid);
      }
    }
    if (jn.contains("measures")) {
      const json& jm = jn.at("measures");
      if (!jm.is_array() || jm.empty()) fail(where + ": \"measures\" must be a nonempty array");
      for (const json& row : jm) {
        if (!row.is_array()) fail(where + ": each measure must be an array of probabilities");
        Vec probs;
        for (const json& p : row) {
          if (!p.is_number()) fail(where + ": probabilities must be numbers");
          double pv = p.get<double>();
          if (pv < 0.0) fail(where + ": negative probability");
          probs.push_back(pv);
        }
        node.measures.extremes.push_back(std::move(probs));
      }
    } else if (node.time < horizon) {
      fail(where + ": non-terminal node needs \"measures\"");
    }
    if (node.time >= horizon && jn.contains("measures")) {
      fail(where + ": terminal node cannot carry \"measures\"");
    }
  }

  // Wire parents and locate the root.
  for (NodeId n = 0; n < static_cast<NodeId>(market.tree.nodes.size()); ++n) {
    for (NodeId c : market.tree.nodes[n].children) {
      if (market.tree.nodes[c].parent != -1) {
        fail("node " + std::to_string(c) + " has two parents");
      }
      market.tree.nodes[c].parent = n;
    }
  }
  NodeId root = -1;
  for (NodeId n = 0; n < static_cast<NodeId>(market.tree.nodes.size()); ++n) {
    if (market.tree.nodes[n].parent == -1) {
      if (root != -1) fail("multiple root nodes (" + std::to_string(root) + " and " +
                           std::to_string(n) + ")");
      root = n;
    }
  }
  market.tree.root = root;

  if (j.contains("utility")) {
    market.utility = parse_utility(j.at("utility"), market.tree);
  } else {
    fail("the market file needs a \"utility\" block");
  }

  ValidationReport report = validate_tree(market.tree);
  if (!report.ok()) {
    std::ostringstream msg;
    msg << "invalid market:";
    std::size_t shown = 0;
    for (const ValidationIssue& issue : report.issues) {
      if (shown++ == 5) { msg << " ..."; break; }
      msg << " [node " << issue.node << ": " << issue.message << "]";
    }
    fail(msg.str());
  }
  return market;
}

Market load_market(const std::string& path) { return parse_market_file(read_file(path)); }

std::string serialize_market(const Market& market) {
  const ScenarioTree& tree = market.tree;
  std::ostringstream out;
  out << "{\n";
  out << "  \"version\": 1,\n";
  out << "  \"d\": " << tree.asset_count << ",\n";
  out << "  \"T\": " << tree.horizon << ",\n";
  out << "  \"utility\": {";
  switch (market.utility.family()) {
    case UtilityFamily::Log:
      out << "\"family\": \"log\"";
      break;
    case UtilityFamily::Power:
      out << "\"family\": \"power\", \"gamma\": " << format_double(market.utility.gamma());
      break;
    case UtilityFamily::ExponentialBounded:
      out << "\"family\": \"exponential\", \"alpha\": " << format_double(market.utility.alpha());
      break;
    case UtilityFamily::PiecewiseLinear: {
      out << "\"family\": \"piecewise\", \"knots\": [";
      const ConcavePLF& plf = market.utility.plf();
      for (std::size_t i = 0; i < plf.knots().size(); ++i) {
        out << (i ? ", " : "") << format_double(plf.knots()[i]);
      }
      out << "], \"values\": [";
      for (std::size_t i = 0; i < plf.values().size(); ++i) {
        out << (i ? ", " : "") << format_double(plf.values()[i]);
      }
      out << "]";
      break;
    }
  }
  if (market.utility.endowment_enabled()) {
    out << ", \"endowments\": {";
    bool first = true;
    for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
      if (!tree.is_terminal(n) || tree.nodes[n].endowment == 0.0) continue;
      out << (first ? "" : ", ") << "\"" << n << "\": " << format_double(tree.nodes[n].endowment);
      first = false;
    }
    out << "}";
  }
  out << "},\n";
  out << "  \"nodes\": [\n";
  for (NodeId n = 0; n < static_cast<NodeId>(tree.nodes.size()); ++n) {
    const Node& node = tree.nodes[n];
    out << "    {\"id\": " << n << ", \"t\": " << node.time;
    if (!node.name.empty()) out << ", \"name\": \"" << node.name << "\"";
    out << ", \"S\": [";
    for (std::size_t a = 0; a < node.price.size(); ++a) {
      out << (a ? ", " : "") << format_double(node.price[a]);
    }
    out << "]";
    if (!node.children.empty()) {
      out << ", \"children\": [";
      for (std::size_t c = 0; c < node.children.size(); ++c) {
        out << (c ? ", " : "") << node.children[c];
      }
      out << "], \"measures\": [";
      for (std::size_t e = 0; e < node.measures.extremes.size(); ++e) {
        out << (e ? ", " : "") << "[";
        const Vec& row = node.measures.extremes[e];
        for (std::size_t c = 0; c < row.size(); ++c) {
          out << (c ? ", " : "") << format_double(row[c]);
        }
        out << "]";
      }
      out << "]";
    }
    out << "}" << (n + 1 < static_cast<NodeId>(tree.nodes.size()) ? "," : "") << "\n";
  }
  out << "  ]\n";
  out << "}\n";
  return out.str();
}

std::string serialize_report(const SolveReport& r) {
  std::ostringstream out;
  auto write_vec = [&](const Vec& v) {
    out << "[";
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << format_double(v[i]);
    out << "]";
  };
  out << "{\n";
  out << "  \"report\": \"solve\",\n";
  out << "  \"input\": {\"x0\": " << format_double(r.x0) << ", \"tol\": " << format_double(r.tol)
      << ", \"grid_knots\": " << r.grid_knots
      << ", \"allow_unbounded\": " << (r.allow_unbounded ? "true" : "false") << "},\n";
  out << "  \"value\": {\"certified\": " << format_double(r.certified_value)
      << ", \"grid\": " << format_double(r.grid_value)
      << ", \"eps_grid\": " << format_double(r.eps_grid)
      << ", \"wealth_bound\": " << format_double(r.wealth_bound)
      << ", \"max_wealth\": " << format_double(r.max_wealth) << "},\n";
  out << "  \"na\": {\"holds\": " << (r.na_holds ? "true" : "false") << ", \"nodes\": [";
  for (std::size_t i = 0; i < r.na.size(); ++i) {
    out << (i ? ", " : "") << "{\"id\": " << r.na[i].node
        << ", \"holds\": " << (r.na[i].holds ? "true" : "false") << "}";
  }
  out << "]},\n";
  out << "  \"margins\": [";
  for (std::size_t i = 0; i < r.margins.size(); ++i) {
    out << (i ? ", " : "") << "{\"id\": " << r.margins[i].node
        << ", \"margin\": " << format_double(r.margins[i].margin) << "}";
  }
  out << "],\n";
  out << "  \"strategy\": [\n";
  for (std::size_t i = 0; i < r.strategy.size(); ++i) {
    out << "    {\"id\": " << r.strategy[i].node << ", \"h\": ";
    write_vec(r.strategy[i].h);
    out << "}" << (i + 1 < r.strategy.size() ? "," : "") << "\n";
  }
  out << "  ],\n";
  out << "  \"chain\": {\"values\": ";
  write_vec(r.chain);
  out << ", \"eps\": " << format_double(r.chain_eps)
      << ", \"nonincreasing\": " << (r.chain_nonincreasing ? "true" : "false")
      << ", \"spread\": " << format_double(r.chain_spread) << "},\n";
  out << "  \"slice_eps\": ";
  write_vec(r.slice_eps);
  out << "\n}\n";
  return out.str();
}

SolveReport parse_report(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("report is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) fail("report must be a JSON object");
  reject_unknown_keys(j, {"report", "input", "value", "na", "margins", "strategy", "chain",
                          "slice_eps"},
                      "the report");
  if (!j.contains("report") || j.at("report") != "solve") fail("not a solve report");

  SolveReport r;
  const json& in = j.at("input");
  reject_unknown_keys(in, {"x0", "tol", "grid_knots", "allow_unbounded"}, "report input");
  r.x0 = number_at(in, "x0", "report input");
  r.tol = number_at(in, "tol", "report input");
  r.grid_knots = int_at(in, "grid_knots", "report input");
  r.allow_unbounded = in.at("allow_unbounded").get<bool>();

  const json& val = j.at("value");
  reject_unknown_keys(val, {"certified", "grid", "eps_grid", "wealth_bound", "max_wealth"},
                      "report value");
  r.certified_value = number_at(val, "certified", "report value");
  r.grid_value = number_at(val, "grid", "report value");
  r.eps_grid = number_at(val, "eps_grid", "report value");
  r.wealth_bound = number_at(val, "wealth_bound", "report value");
  r.max_wealth = number_at(val, "max_wealth", "report value");

  const json& na = j.at("na");
  reject_unknown_keys(na, {"holds", "nodes"}, "report na");
  r.na_holds = na.at("holds").get<bool>();
  for (const json& e : na.at("nodes")) {
    NAEntry entry;
    entry.node = int_at(e, "id", "na entry");
    entry.holds = e.at("holds").get<bool>();
    r.na.push_back(entry);
  }
  for (const json& e : j.at("margins")) {
    MarginEntry entry;
    entry.node = int_at(e, "id", "margin entry");
    entry.margin = number_at(e, "margin", "margin entry");
    r.margins.push_back(entry);
  }
  for (const json& e : j.at("strategy")) {
    StrategyEntry entry;
    entry.node = int_at(e, "id", "strategy entry");
    entry.h = vec_at(e, "h", "strategy entry");
    r.strategy.push_back(entry);
  }
  const json& chain = j.at("chain");
  reject_unknown_keys(chain, {"values", "eps", "nonincreasing", "spread"}, "report chain");
  r.chain = vec_at(chain, "values", "report chain");
  r.chain_eps = number_at(chain, "eps", "report chain");
  r.chain_nonincreasing = chain.at("nonincreasing").get<bool>();
  r.chain_spread = number_at(chain, "spread", "report chain");
  r.slice_eps = vec_at(j, "slice_eps", "the report");
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write file: " + path);
  out << content;
  if (!out.good()) throw input_error("write failed: " + path);
}

}  // namespace rum::io
