#include "graphnlp/graph.hpp"

#include <algorithm>
#include <cmath>

namespace gnlp {

NodeId OptiGraph::add_node() {
  ++num_nodes_;
  adj_.emplace_back();
  return num_nodes_;
}

void OptiGraph::check_node(NodeId node) const {
  if (node < 1 || node > num_nodes_)
    throw UnknownNode("node " + std::to_string(node) + " does not exist");
}

void OptiGraph::add_edge(NodeId u, NodeId v) {
  check_node(u);
  check_node(v);
  if (u == v) throw SelfLoop("self-loop at node " + std::to_string(u));
  auto& nu = adj_[u - 1];
  if (std::binary_search(nu.begin(), nu.end(), v))
    throw DuplicateEdge("edge {" + std::to_string(u) + "," +
                        std::to_string(v) + "} already exists");
  nu.insert(std::lower_bound(nu.begin(), nu.end(), v), v);
  auto& nv = adj_[v - 1];
  nv.insert(std::lower_bound(nv.begin(), nv.end(), u), u);
  edges_.emplace_back(u, v);
}

const std::vector<NodeId>& OptiGraph::neighbors(NodeId node) const {
  check_node(node);
  return adj_[node - 1];
}

Expr OptiGraph::add_variable(NodeId node, double lb, double ub, double start,
                             std::string name) {
  check_node(node);
  if (lb > ub)
    throw Error("variable bounds are empty: [" + std::to_string(lb) + ", " +
                std::to_string(ub) + "]");
  VariableInfo info{node, lb, ub, start, std::move(name)};
  vars_.push_back(std::move(info));
  return pool_.variable(static_cast<std::int32_t>(vars_.size()) - 1);
}

std::vector<std::int32_t> OptiGraph::referenced_variables(Expr e) const {
  if (!e.valid() || e.pool() != &pool_)
    throw Error("expression does not belong to this graph");
  // Light DFS; compiling a tape here would redo sparsity work for nothing.
  std::vector<char> seen(pool_.size(), 0);
  std::vector<std::int32_t> stack{e.id()};
  std::vector<std::int32_t> out;
  while (!stack.empty()) {
    std::int32_t id = stack.back();
    stack.pop_back();
    if (seen[id]) continue;
    seen[id] = 1;
    const ExprNode& n = pool_.node(id);
    if (n.op == Op::kVar) out.push_back(n.var);
    if (n.a >= 0) stack.push_back(n.a);
    if (n.b >= 0) stack.push_back(n.b);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void OptiGraph::check_scope(NodeId node, Expr expr, bool link) const {
  const auto& nbrs = adj_[node - 1];
  for (std::int32_t v : referenced_variables(expr)) {
    const NodeId owner = vars_[v].node;
    if (owner == node) continue;
    if (link && std::binary_search(nbrs.begin(), nbrs.end(), owner)) continue;
    const std::string& vn = vars_[v].name;
    throw ScopeViolation(
        "variable " + (vn.empty() ? "#" + std::to_string(v) : vn) +
        " of node " + std::to_string(owner) + " is out of scope for node " +
        std::to_string(node) +
        (link ? " (not adjacent)" : " (inner constraints are node-local)"));
  }
}

int OptiGraph::add_constraint(NodeId node, Expr expr, Sense sense, double rhs,
                              std::string name) {
  check_node(node);
  check_scope(node, expr, /*link=*/false);
  cons_.push_back({node, expr.id(), sense, rhs, false, std::move(name)});
  return static_cast<int>(cons_.size()) - 1;
}

int OptiGraph::add_link_constraint(NodeId node, Expr expr, double rhs,
                                   std::string name) {
  check_node(node);
  check_scope(node, expr, /*link=*/true);
  cons_.push_back({node, expr.id(), Sense::kEq, rhs, true, std::move(name)});
  return static_cast<int>(cons_.size()) - 1;
}

void OptiGraph::add_objective_term(NodeId node, Expr expr) {
  check_node(node);
  check_scope(node, expr, /*link=*/false);
  obj_.push_back({node, expr.id()});
}

}  // namespace gnlp
