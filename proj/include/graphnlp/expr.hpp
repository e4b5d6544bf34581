#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "graphnlp/errors.hpp"

namespace gnlp {

/// Closed operator catalog. Extending it means touching eval, the three
/// derivative sweeps and the sparsity rules in expr.cpp, plus model_io.
enum class Op : std::uint8_t {
  kConst,
  kVar,
  // unary
  kNeg,
  kSquare,
  kSqrt,
  kExp,
  kLog,
  kSin,
  kCos,
  kSignedSquare,  // x*|x|; C1 at 0 with second derivative taken as 0 there
  kPowInt,        // integer exponent stored on the node
  // binary
  kAdd,
  kSub,
  kMul,
  kDiv,
};

bool is_unary(Op op);
bool is_binary(Op op);
const char* op_name(Op op);

struct ExprNode {
  Op op;
  std::int32_t a{-1};  // child ids within the owning pool
  std::int32_t b{-1};
  double constant{0.0};   // kConst payload
  std::int32_t var{-1};   // kVar payload: model-wide variable index
  std::int32_t exponent{0};  // kPowInt payload
};

class ExprPool;

/// Value-semantic handle to a node inside an ExprPool. Cheap to copy; only
/// meaningful together with its pool.
class Expr {
 public:
  Expr() = default;
  bool valid() const { return pool_ != nullptr; }
  std::int32_t id() const { return id_; }
  ExprPool* pool() const { return pool_; }

 private:
  friend class ExprPool;
  Expr(ExprPool* pool, std::int32_t id) : pool_(pool), id_(id) {}
  ExprPool* pool_{nullptr};
  std::int32_t id_{-1};
};

/// Arena of immutable DAG nodes. Children always precede parents, so node id
/// order is a topological order. Variable leaves are deduplicated per index.
class ExprPool {
 public:
  Expr constant(double value);
  Expr variable(std::int32_t var_index);
  Expr unary(Op op, Expr child);
  Expr binary(Op op, Expr lhs, Expr rhs);
  Expr pow_int(Expr base, int exponent);

  /// Handle to an already existing node; ids are stable, so this is how
  /// stored expressions are rematerialized after the pool is copied.
  Expr handle(std::int32_t id) const;

  const ExprNode& node(std::int32_t id) const { return nodes_[id]; }
  std::int32_t size() const { return static_cast<std::int32_t>(nodes_.size()); }

 private:
  std::int32_t check(Expr e) const;
  std::vector<ExprNode> nodes_;
  std::vector<std::pair<std::int32_t, std::int32_t>> var_cache_;  // var -> id
};

// ---- operator sugar -------------------------------------------------------

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr operator+(Expr a, double c);
Expr operator+(double c, Expr a);
Expr operator-(Expr a, double c);
Expr operator-(double c, Expr a);
Expr operator*(Expr a, double c);
Expr operator*(double c, Expr a);
Expr operator/(Expr a, double c);
Expr operator/(double c, Expr a);

Expr square(Expr a);
Expr sqrt(Expr a);
Expr exp(Expr a);
Expr log(Expr a);
Expr sin(Expr a);
Expr cos(Expr a);
Expr signed_square(Expr a);
Expr pow_int(Expr a, int exponent);

// ---- compiled form --------------------------------------------------------

/// Tape node with children remapped to tape-local positions and variables
/// remapped to local slots (positions within Tape::variables()).
struct TapeNode {
  Op op;
  std::int32_t a{-1};
  std::int32_t b{-1};
  double constant{0.0};
  std::int32_t slot{-1};
  std::int32_t exponent{0};
};

/// Immutable evaluation order for one root expression: the reachable nodes in
/// topological order, the sorted list of referenced variables, and the
/// structural Hessian support. Point-independent by construction.
class Tape {
 public:
  Tape() = default;
  static Tape compile(const ExprPool& pool, Expr root);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_vars() const { return static_cast<int>(vars_.size()); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }

  /// Referenced model variable indices, strictly increasing. Local slot s
  /// corresponds to variables()[s].
  const std::vector<std::int32_t>& variables() const { return vars_; }

  /// Structural lower-triangle Hessian support as local slot pairs (i, j)
  /// with i >= j, sorted lexicographically. A superset of the true support,
  /// exact for the catalog's composition rules.
  const std::vector<std::pair<std::int32_t, std::int32_t>>& hessian_pairs()
      const {
    return pairs_;
  }

 private:
  std::vector<TapeNode> nodes_;
  std::vector<std::int32_t> vars_;
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs_;
};

/// Scratch buffers for the sweeps below. Reusable across tapes; sized on
/// demand. One workspace per thread.
class DerivativeWorkspace {
 public:
  void resize_for(const Tape& tape);

  std::vector<double> val;     // node values
  std::vector<double> dot;     // node tangents
  std::vector<double> bar;     // node adjoints
  std::vector<double> bardot;  // node adjoint tangents
  std::vector<double> grad;    // per-slot gradient accumulator
};

/// Forward sweep. x is indexed by local slot (aligned with tape.variables()).
/// Throws DomainError on invalid arguments or non-finite intermediates.
double eval(const Tape& tape, std::span<const double> x,
            DerivativeWorkspace& ws);

/// Reverse sweep after a forward sweep; writes d(root)/d(slot) into grad_out
/// (length tape.num_vars()).
double eval_gradient(const Tape& tape, std::span<const double> x,
                     DerivativeWorkspace& ws, std::span<double> grad_out);

/// Forward-over-reverse sweep: writes scale * d2(root)/dx_i dx_j for every
/// pair in tape.hessian_pairs(), aligned with that list. Returns the value.
double eval_hessian(const Tape& tape, std::span<const double> x, double scale,
                    DerivativeWorkspace& ws, std::span<double> pair_values);

}  // namespace gnlp
