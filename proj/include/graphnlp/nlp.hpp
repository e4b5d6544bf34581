#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "graphnlp/graph.hpp"

namespace gnlp {

/// Coordinate list with a fixed entry order; values are evaluated into a
/// parallel array so assembled matrices never change shape between points.
struct SparsityPattern {
  std::vector<int> rows;
  std::vector<int> cols;
  int nnz() const { return static_cast<int>(rows.size()); }
};

/// Primal-dual iterate. zl/zu are full length n; entries are meaningful
/// (and must stay positive) only where the matching bound is finite.
struct PrimalDualPoint {
  Eigen::VectorXd x;       // primals, length n
  Eigen::VectorXd lambda;  // equality multipliers, length m
  Eigen::VectorXd zl;      // lower-bound multipliers, length n
  Eigen::VectorXd zu;      // upper-bound multipliers, length n
};

/// Oracle interface consumed by the KKT assembler and the interior-point
/// loop. Implementations must be deterministic: the same point yields
/// bit-identical results regardless of the evaluation thread count.
class Nlp {
 public:
  virtual ~Nlp() = default;

  virtual int num_vars() const = 0;
  virtual int num_cons() const = 0;
  virtual const Eigen::VectorXd& lower() const = 0;
  virtual const Eigen::VectorXd& upper() const = 0;
  virtual const Eigen::VectorXd& start() const = 0;

  virtual double objective(const Eigen::VectorXd& x) const = 0;
  virtual void gradient(const Eigen::VectorXd& x,
                        Eigen::VectorXd& grad) const = 0;
  virtual void constraints(const Eigen::VectorXd& x,
                           Eigen::VectorXd& c) const = 0;

  virtual const SparsityPattern& jacobian_pattern() const = 0;
  virtual void jacobian(const Eigen::VectorXd& x,
                        Eigen::VectorXd& values) const = 0;

  /// Lower triangle of the Lagrangian Hessian
  /// obj_scale * H(f) + sum_i lambda_i H(c_i).
  virtual const SparsityPattern& hessian_pattern() const = 0;
  virtual void hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                       double obj_scale, Eigen::VectorXd& values) const = 0;

  // ---- problem-graph structure, used for partitioning ----

  virtual int num_graph_nodes() const = 0;
  /// Sorted neighbor lists, 0-based graph node indices.
  virtual const std::vector<std::vector<int>>& adjacency() const = 0;
  /// Per graph node, the owned primal-dual indices over {0..n+m-1}
  /// (primal j for owned variables, n+i for owned constraint rows). Sorted,
  /// disjoint and covering.
  virtual const std::vector<std::vector<int>>& index_sets() const = 0;

  virtual void set_threads(int threads) = 0;
};

/// Flat NLP produced by OptiGraph::flatten():
///   min f(x)  s.t.  c(x) = 0,  l <= x <= u.
/// Inequalities gain one slack each (expr - rhs + s = 0 for <=, - s for >=),
/// owned by the constraint's node. Primal layout per node: declared
/// variables, then slacks; constraint rows per node: inner, then link; nodes
/// in order, so both per-node index ranges are contiguous.
class StandardNlp : public Nlp {
 public:
  int num_vars() const override { return n_; }
  int num_cons() const override { return m_; }
  const Eigen::VectorXd& lower() const override { return lb_; }
  const Eigen::VectorXd& upper() const override { return ub_; }
  const Eigen::VectorXd& start() const override { return start_; }

  double objective(const Eigen::VectorXd& x) const override;
  void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override;
  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override;
  const SparsityPattern& jacobian_pattern() const override { return jac_; }
  void jacobian(const Eigen::VectorXd& x,
                Eigen::VectorXd& values) const override;
  const SparsityPattern& hessian_pattern() const override { return hess_; }
  void hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
               double obj_scale, Eigen::VectorXd& values) const override;

  int num_graph_nodes() const override { return num_nodes_; }
  const std::vector<std::vector<int>>& adjacency() const override {
    return adjacency_;
  }
  const std::vector<std::vector<int>>& index_sets() const override {
    return index_sets_;
  }
  void set_threads(int threads) override;

  // ---- metadata ----

  const std::vector<std::string>& variable_names() const { return var_names_; }
  const std::vector<std::string>& constraint_names() const {
    return con_names_;
  }
  int node_of_variable(int j) const { return var_node_[j]; }   // 0-based node
  int node_of_constraint(int i) const { return con_node_[i]; }
  /// Contiguous flat ranges [begin, end) owned by a 0-based node.
  std::pair<int, int> primal_range(int node) const {
    return {primal_begin_[node], primal_begin_[node + 1]};
  }
  std::pair<int, int> dual_range(int node) const {
    return {dual_begin_[node], dual_begin_[node + 1]};
  }
  /// The frozen model this NLP was lowered from.
  const OptiGraph& model() const { return *model_; }

 private:
  friend class OptiGraph;
  StandardNlp() = default;

  struct CompiledExpr {
    Tape tape;
    std::vector<int> var_flat;    // tape slot -> flat variable index
    std::vector<int> jac_slots;   // tape slot -> Jacobian pattern slot
    std::vector<int> hess_slots;  // tape pair -> Hessian pattern slot
    int row{-1};                  // constraint row, -1 for objective terms
    double rhs{0.0};
    int slack_flat{-1};
    double slack_sign{0.0};
    int slack_jac_slot{-1};
  };

  void eval_node_constraints(int node, const Eigen::VectorXd& x,
                             Eigen::VectorXd* c, Eigen::VectorXd* jac) const;

  std::shared_ptr<const OptiGraph> model_;
  int n_{0}, m_{0}, num_nodes_{0};
  Eigen::VectorXd lb_, ub_, start_;
  SparsityPattern jac_, hess_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> index_sets_;
  std::vector<int> primal_begin_, dual_begin_;  // size num_nodes_+1
  std::vector<int> var_node_, con_node_;
  std::vector<std::string> var_names_, con_names_;
  std::vector<std::vector<CompiledExpr>> node_objective_;    // per node
  std::vector<std::vector<CompiledExpr>> node_constraints_;  // per node
  // Per-node Hessian contribution buffers: filled in parallel, merged
  // serially in node order so results do not depend on the thread count.
  mutable std::vector<std::vector<double>> hess_scratch_;
  int threads_{1};
};

}  // namespace gnlp
