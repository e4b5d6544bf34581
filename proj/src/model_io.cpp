#include "graphnlp/model_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace gnlp {
namespace {

using json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* sense_name(Sense s) {
  switch (s) {
    case Sense::kEq: return "eq";
    case Sense::kLe: return "le";
    case Sense::kGe: return "ge";
  }
  return "eq";
}

Sense sense_from(const std::string& s) {
  if (s == "eq") return Sense::kEq;
  if (s == "le") return Sense::kLe;
  if (s == "ge") return Sense::kGe;
  throw ParseError("unknown constraint sense '" + s + "'");
}

// Shared subtrees are expanded; reading rebuilds an equivalent tree whose
// serialization matches byte for byte.
json expr_to_json(const ExprPool& pool, std::int32_t id) {
  const ExprNode& nd = pool.node(id);
  switch (nd.op) {
    case Op::kConst:
      return json(nd.constant);
    case Op::kVar:
      return json::array({"var", nd.var});
    case Op::kPowInt:
      return json::array({"pow_int", expr_to_json(pool, nd.a), nd.exponent});
    default:
      if (is_unary(nd.op))
        return json::array({op_name(nd.op), expr_to_json(pool, nd.a)});
      return json::array({op_name(nd.op), expr_to_json(pool, nd.a),
                          expr_to_json(pool, nd.b)});
  }
}

Expr expr_from_json(OptiGraph& g, const std::vector<Expr>& vars,
                    const json& j) {
  if (j.is_number()) return g.constant(j.get<double>());
  if (!j.is_array() || j.empty() || !j[0].is_string())
    throw ParseError("expression must be a number or a prefix array");
  const std::string op = j[0].get<std::string>();
  if (op == "var") {
    if (j.size() != 2 || !j[1].is_number_integer())
      throw ParseError("var expects one integer argument");
    const auto k = j[1].get<std::int64_t>();
    if (k < 0 || k >= static_cast<std::int64_t>(vars.size()))
      throw ParseError("variable index " + std::to_string(k) +
                       " out of range");
    return vars[static_cast<std::size_t>(k)];
  }
  if (op == "pow_int") {
    if (j.size() != 3 || !j[2].is_number_integer())
      throw ParseError("pow_int expects an expression and an integer");
    return pow_int(expr_from_json(g, vars, j[1]), j[2].get<int>());
  }
  static const std::unordered_map<std::string, Op> kOps = {
      {"neg", Op::kNeg},   {"square", Op::kSquare},
      {"sqrt", Op::kSqrt}, {"exp", Op::kExp},
      {"log", Op::kLog},   {"sin", Op::kSin},
      {"cos", Op::kCos},   {"signed_square", Op::kSignedSquare},
      {"add", Op::kAdd},   {"sub", Op::kSub},
      {"mul", Op::kMul},   {"div", Op::kDiv},
  };
  auto it = kOps.find(op);
  if (it == kOps.end()) throw ParseError("unknown operator '" + op + "'");
  if (is_unary(it->second)) {
    if (j.size() != 2)
      throw ParseError(op + " expects exactly one argument");
    return g.pool().unary(it->second, expr_from_json(g, vars, j[1]));
  }
  if (j.size() != 3) throw ParseError(op + " expects exactly two arguments");
  return g.pool().binary(it->second, expr_from_json(g, vars, j[1]),
                         expr_from_json(g, vars, j[2]));
}

OptiGraph read_model_impl(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object() || j.value("format", "") != "graphnlp-model")
    throw ParseError("not a graphnlp-model document");
  if (j.value("version", 0) != 1)
    throw ParseError("unsupported model version");

  OptiGraph g;
  const int nodes = j.at("nodes").get<int>();
  if (nodes < 0) throw ParseError("negative node count");
  for (int i = 0; i < nodes; ++i) g.add_node();

  for (const json& e : j.value("edges", json::array())) {
    if (!e.is_array() || e.size() != 2)
      throw ParseError("edge must be a pair of node ids");
    g.add_edge(e[0].get<NodeId>(), e[1].get<NodeId>());
  }

  std::vector<Expr> vars;
  for (const json& v : j.value("variables", json::array())) {
    vars.push_back(g.add_variable(
        v.at("node").get<NodeId>(), v.value("lb", -kInf), v.value("ub", kInf),
        v.value("start", std::numeric_limits<double>::quiet_NaN()),
        v.value("name", std::string())));
  }

  for (const json& c : j.value("constraints", json::array())) {
    const NodeId node = c.at("node").get<NodeId>();
    Expr expr = expr_from_json(g, vars, c.at("expr"));
    const Sense sense = sense_from(c.at("sense").get<std::string>());
    const double rhs = c.at("rhs").get<double>();
    std::string name = c.value("name", std::string());
    if (c.value("link", false)) {
      if (sense != Sense::kEq)
        throw ParseError("link constraints must be equalities");
      g.add_link_constraint(node, expr, rhs, std::move(name));
    } else {
      g.add_constraint(node, expr, sense, rhs, std::move(name));
    }
  }

  for (const json& t : j.value("objective", json::array()))
    g.add_objective_term(t.at("node").get<NodeId>(),
                         expr_from_json(g, vars, t.at("expr")));
  return g;
}

}  // namespace

std::string write_model(const OptiGraph& g) {
  json j;
  j["format"] = "graphnlp-model";
  j["version"] = 1;
  j["nodes"] = g.num_nodes();

  json edges = json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);

  json vars = json::array();
  for (int i = 0; i < g.num_variables(); ++i) {
    const VariableInfo& v = g.variable(i);
    json jv;
    jv["node"] = v.node;
    if (!v.name.empty()) jv["name"] = v.name;
    if (std::isfinite(v.lb)) jv["lb"] = v.lb;
    if (std::isfinite(v.ub)) jv["ub"] = v.ub;
    if (!std::isnan(v.start)) jv["start"] = v.start;
    vars.push_back(std::move(jv));
  }
  j["variables"] = std::move(vars);

  json cons = json::array();
  for (int i = 0; i < g.num_constraints(); ++i) {
    const ConstraintInfo& c = g.constraint(i);
    json jc;
    jc["node"] = c.node;
    if (!c.name.empty()) jc["name"] = c.name;
    jc["sense"] = sense_name(c.sense);
    jc["rhs"] = c.rhs;
    jc["link"] = c.link;
    jc["expr"] = expr_to_json(g.pool(), c.expr);
    cons.push_back(std::move(jc));
  }
  j["constraints"] = std::move(cons);

  json obj = json::array();
  for (int i = 0; i < g.num_objective_terms(); ++i) {
    const ObjectiveTerm& t = g.objective_term(i);
    obj.push_back({{"node", t.node},
                   {"expr", expr_to_json(g.pool(), t.expr)}});
  }
  j["objective"] = std::move(obj);
  return j.dump(2) + "\n";
}

OptiGraph read_model(const std::string& text) {
  try {
    return read_model_impl(text);
  } catch (const ParseError&) {
    throw;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  } catch (const Error& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
}

void save_model(const OptiGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << write_model(g);
  if (!out) throw Error("failed writing '" + path + "'");
}

OptiGraph load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_model(buf.str());
}

}  // namespace gnlp
