#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "graphnlp/expr.hpp"

namespace gnlp {

class StandardNlp;

/// Node handles are 1-based and dense: the k-th add_node() returns k.
using NodeId = std::int32_t;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { kEq, kLe, kGe };

struct VariableInfo {
  NodeId node;
  double lb;
  double ub;
  double start;  // NaN requests the default (midpoint / shifted 1.0)
  std::string name;
};

// Stored expressions are pool node ids, not Expr handles: ids survive copies
// of the graph, handles would keep pointing at the original pool.
struct ConstraintInfo {
  NodeId node;  // owner
  std::int32_t expr;
  Sense sense;
  double rhs;
  bool link;
  std::string name;
};

struct ObjectiveTerm {
  NodeId node;
  std::int32_t expr;
};

/// Graph-structured model: nodes own variables, objective terms and inner
/// constraints; link constraints may additionally reference variables of
/// nodes adjacent to their owner. Scope is enforced at build time, so a
/// successfully constructed model never fails scoping later.
class OptiGraph {
 public:
  NodeId add_node();

  /// Undirected edge; rejects self-loops and duplicates (in either order).
  void add_edge(NodeId u, NodeId v);

  /// Returns the variable as an expression handle for use in this graph's
  /// expressions. Bounds may be infinite on either side.
  Expr add_variable(NodeId node, double lb, double ub,
                    double start = std::numeric_limits<double>::quiet_NaN(),
                    std::string name = "");

  Expr constant(double value) { return pool_.constant(value); }

  /// Inner constraint: expr (sense) rhs, all variables owned by node.
  int add_constraint(NodeId node, Expr expr, Sense sense, double rhs,
                     std::string name = "");

  /// Link constraint: expr == rhs, variables owned by node or its neighbors.
  int add_link_constraint(NodeId node, Expr expr, double rhs,
                          std::string name = "");

  void add_objective_term(NodeId node, Expr expr);

  int num_nodes() const { return num_nodes_; }
  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_constraints() const { return static_cast<int>(cons_.size()); }
  int num_objective_terms() const { return static_cast<int>(obj_.size()); }

  const std::vector<std::pair<NodeId, NodeId>>& edges() const {
    return edges_;
  }
  /// Sorted neighbor list of a node.
  const std::vector<NodeId>& neighbors(NodeId node) const;

  const VariableInfo& variable(int index) const { return vars_[index]; }
  const ConstraintInfo& constraint(int index) const { return cons_[index]; }
  const ObjectiveTerm& objective_term(int index) const { return obj_[index]; }
  const ExprPool& pool() const { return pool_; }
  ExprPool& pool() { return pool_; }

  /// Variables referenced by an expression, as model variable indices.
  std::vector<std::int32_t> referenced_variables(Expr e) const;

  /// Lowers the model to a flat NLP with slacks for inequalities. Throws
  /// EmptyModel when there is nothing to optimize.
  StandardNlp flatten() const;

 private:
  void check_node(NodeId node) const;
  void check_scope(NodeId node, Expr expr, bool link) const;

  ExprPool pool_;
  std::vector<VariableInfo> vars_;  // model variable index == pool index
  std::vector<ConstraintInfo> cons_;
  std::vector<ObjectiveTerm> obj_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> adj_;
  int num_nodes_{0};
};

}  // namespace gnlp
