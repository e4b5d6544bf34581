#include "graphnlp/expr.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace gnlp {

bool is_unary(Op op) {
  switch (op) {
    case Op::kNeg:
    case Op::kSquare:
    case Op::kSqrt:
    case Op::kExp:
    case Op::kLog:
    case Op::kSin:
    case Op::kCos:
    case Op::kSignedSquare:
    case Op::kPowInt:
      return true;
    default:
      return false;
  }
}

bool is_binary(Op op) {
  switch (op) {
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
      return true;
    default:
      return false;
  }
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kVar: return "var";
    case Op::kNeg: return "neg";
    case Op::kSquare: return "square";
    case Op::kSqrt: return "sqrt";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kSignedSquare: return "signed_square";
    case Op::kPowInt: return "pow_int";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
  }
  return "?";
}

// ---- pool ------------------------------------------------------------------

std::int32_t ExprPool::check(Expr e) const {
  if (!e.valid() || e.pool() != this || e.id() < 0 || e.id() >= size())
    throw Error("expression handle does not belong to this pool");
  return e.id();
}

Expr ExprPool::constant(double value) {
  ExprNode n;
  n.op = Op::kConst;
  n.constant = value;
  nodes_.push_back(n);
  return Expr(this, size() - 1);
}

Expr ExprPool::variable(std::int32_t var_index) {
  if (var_index < 0) throw Error("variable index must be non-negative");
  auto it = std::lower_bound(
      var_cache_.begin(), var_cache_.end(), var_index,
      [](const auto& p, std::int32_t v) { return p.first < v; });
  if (it != var_cache_.end() && it->first == var_index)
    return Expr(this, it->second);
  ExprNode n;
  n.op = Op::kVar;
  n.var = var_index;
  nodes_.push_back(n);
  var_cache_.insert(it, {var_index, size() - 1});
  return Expr(this, size() - 1);
}

Expr ExprPool::unary(Op op, Expr child) {
  if (!is_unary(op)) throw Error("not a unary operator");
  ExprNode n;
  n.op = op;
  n.a = check(child);
  nodes_.push_back(n);
  return Expr(this, size() - 1);
}

Expr ExprPool::binary(Op op, Expr lhs, Expr rhs) {
  if (!is_binary(op)) throw Error("not a binary operator");
  ExprNode n;
  n.op = op;
  n.a = check(lhs);
  n.b = check(rhs);
  nodes_.push_back(n);
  return Expr(this, size() - 1);
}

Expr ExprPool::handle(std::int32_t id) const {
  if (id < 0 || id >= size()) throw Error("expression id out of range");
  // The handle only identifies the node; building through it still requires
  // mutable access to the pool.
  return Expr(const_cast<ExprPool*>(this), id);
}

Expr ExprPool::pow_int(Expr base, int exponent) {
  ExprNode n;
  n.op = Op::kPowInt;
  n.a = check(base);
  n.exponent = exponent;
  nodes_.push_back(n);
  return Expr(this, size() - 1);
}

// ---- sugar -----------------------------------------------------------------

namespace {
ExprPool& pool_of(Expr a) {
  if (!a.valid()) throw Error("empty expression handle");
  return *a.pool();
}
ExprPool& common_pool(Expr a, Expr b) {
  ExprPool& p = pool_of(a);
  if (b.pool() != &p) throw Error("expressions belong to different pools");
  return p;
}
}  // namespace

Expr operator+(Expr a, Expr b) { return common_pool(a, b).binary(Op::kAdd, a, b); }
Expr operator-(Expr a, Expr b) { return common_pool(a, b).binary(Op::kSub, a, b); }
Expr operator*(Expr a, Expr b) { return common_pool(a, b).binary(Op::kMul, a, b); }
Expr operator/(Expr a, Expr b) { return common_pool(a, b).binary(Op::kDiv, a, b); }
Expr operator-(Expr a) { return pool_of(a).unary(Op::kNeg, a); }
Expr operator+(Expr a, double c) { return a + pool_of(a).constant(c); }
Expr operator+(double c, Expr a) { return pool_of(a).constant(c) + a; }
Expr operator-(Expr a, double c) { return a - pool_of(a).constant(c); }
Expr operator-(double c, Expr a) { return pool_of(a).constant(c) - a; }
Expr operator*(Expr a, double c) { return a * pool_of(a).constant(c); }
Expr operator*(double c, Expr a) { return pool_of(a).constant(c) * a; }
Expr operator/(Expr a, double c) { return a / pool_of(a).constant(c); }
Expr operator/(double c, Expr a) { return pool_of(a).constant(c) / a; }

Expr square(Expr a) { return pool_of(a).unary(Op::kSquare, a); }
Expr sqrt(Expr a) { return pool_of(a).unary(Op::kSqrt, a); }
Expr exp(Expr a) { return pool_of(a).unary(Op::kExp, a); }
Expr log(Expr a) { return pool_of(a).unary(Op::kLog, a); }
Expr sin(Expr a) { return pool_of(a).unary(Op::kSin, a); }
Expr cos(Expr a) { return pool_of(a).unary(Op::kCos, a); }
Expr signed_square(Expr a) { return pool_of(a).unary(Op::kSignedSquare, a); }
Expr pow_int(Expr a, int exponent) { return pool_of(a).pow_int(a, exponent); }

// ---- compilation -----------------------------------------------------------

namespace {

// Sorted-unique merge used by the sparsity propagation.
std::vector<std::int32_t> merge_vars(const std::vector<std::int32_t>& a,
                                     const std::vector<std::int32_t>& b) {
  std::vector<std::int32_t> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

using PairSet = std::set<std::pair<std::int32_t, std::int32_t>>;

void add_pair(PairSet& pairs, std::int32_t i, std::int32_t j) {
  if (i < j) std::swap(i, j);
  pairs.insert({i, j});
}

void add_cross(PairSet& pairs, const std::vector<std::int32_t>& a,
               const std::vector<std::int32_t>& b) {
  for (std::int32_t i : a)
    for (std::int32_t j : b) add_pair(pairs, i, j);
}

}  // namespace

Tape Tape::compile(const ExprPool& pool, Expr root) {
  if (!root.valid() || root.pool() != &pool)
    throw Error("root expression does not belong to the pool");

  // Reachable set via DFS; pool ids are already topologically ordered.
  std::vector<char> reach(pool.size(), 0);
  std::vector<std::int32_t> stack{root.id()};
  while (!stack.empty()) {
    std::int32_t id = stack.back();
    stack.pop_back();
    if (reach[id]) continue;
    reach[id] = 1;
    const ExprNode& n = pool.node(id);
    if (n.a >= 0) stack.push_back(n.a);
    if (n.b >= 0) stack.push_back(n.b);
  }

  Tape tape;
  std::vector<std::int32_t> local(pool.size(), -1);
  for (std::int32_t id = 0; id < pool.size(); ++id) {
    if (!reach[id]) continue;
    const ExprNode& n = pool.node(id);
    TapeNode t;
    t.op = n.op;
    t.constant = n.constant;
    t.exponent = n.exponent;
    if (n.a >= 0) t.a = local[n.a];
    if (n.b >= 0) t.b = local[n.b];
    if (n.op == Op::kVar) {
      auto it = std::lower_bound(tape.vars_.begin(), tape.vars_.end(), n.var);
      if (it == tape.vars_.end() || *it != n.var) tape.vars_.insert(it, n.var);
    }
    local[id] = static_cast<std::int32_t>(tape.nodes_.size());
    tape.nodes_.push_back(t);
  }
  // Second pass: variable slots (var list is final only now).
  for (TapeNode& t : tape.nodes_) {
    if (t.op != Op::kVar) continue;
    // Find the pool var index back from the original node: recompute below.
    t.slot = -2;  // filled next loop
  }
  {
    std::int32_t k = 0;
    for (std::int32_t id = 0; id < pool.size(); ++id) {
      if (!reach[id]) continue;
      const ExprNode& n = pool.node(id);
      if (n.op == Op::kVar) {
        auto it =
            std::lower_bound(tape.vars_.begin(), tape.vars_.end(), n.var);
        tape.nodes_[k].slot =
            static_cast<std::int32_t>(it - tape.vars_.begin());
      }
      ++k;
    }
  }

  // Structural Hessian support: propagate per-node variable sets and collect
  // interaction pairs at nonlinear operations.
  std::vector<std::vector<std::int32_t>> vset(tape.nodes_.size());
  PairSet pairs;
  for (size_t i = 0; i < tape.nodes_.size(); ++i) {
    const TapeNode& t = tape.nodes_[i];
    switch (t.op) {
      case Op::kConst:
        break;
      case Op::kVar:
        vset[i] = {t.slot};
        break;
      case Op::kNeg:
        vset[i] = vset[t.a];
        break;
      case Op::kAdd:
      case Op::kSub:
        vset[i] = merge_vars(vset[t.a], vset[t.b]);
        break;
      case Op::kMul:
        add_cross(pairs, vset[t.a], vset[t.b]);
        vset[i] = merge_vars(vset[t.a], vset[t.b]);
        break;
      case Op::kDiv:
        add_cross(pairs, vset[t.a], vset[t.b]);
        add_cross(pairs, vset[t.b], vset[t.b]);
        vset[i] = merge_vars(vset[t.a], vset[t.b]);
        break;
      case Op::kPowInt:
        if (t.exponent != 0 && t.exponent != 1)
          add_cross(pairs, vset[t.a], vset[t.a]);
        vset[i] = vset[t.a];
        break;
      default:  // remaining unary ops are nonlinear
        add_cross(pairs, vset[t.a], vset[t.a]);
        vset[i] = vset[t.a];
        break;
    }
  }
  tape.pairs_.assign(pairs.begin(), pairs.end());
  return tape;
}

// ---- sweeps ----------------------------------------------------------------

void DerivativeWorkspace::resize_for(const Tape& tape) {
  size_t n = static_cast<size_t>(tape.num_nodes());
  if (val.size() < n) {
    val.resize(n);
    dot.resize(n);
    bar.resize(n);
    bardot.resize(n);
  }
  if (grad.size() < static_cast<size_t>(tape.num_vars()))
    grad.resize(tape.num_vars());
}

namespace {

[[noreturn]] void domain_fail(Op op, const char* what) {
  throw DomainError(std::string(op_name(op)) + ": " + what);
}

// x^n for integer n; caller guarantees x != 0 when n < 0.
double ipow(double x, int n) {
  bool inv = n < 0;
  unsigned int k = static_cast<unsigned int>(inv ? -(long long)n : n);
  double r = 1.0, b = x;
  while (k) {
    if (k & 1u) r *= b;
    b *= b;
    k >>= 1;
  }
  return inv ? 1.0 / r : r;
}

// First and second derivative of a unary operator at child value x (value v).
struct UnaryD {
  double d1, d2;
};

UnaryD unary_partials(const TapeNode& t, double x, double v) {
  switch (t.op) {
    case Op::kNeg: return {-1.0, 0.0};
    case Op::kSquare: return {2.0 * x, 2.0};
    case Op::kSqrt:
      if (x <= 0.0) domain_fail(t.op, "derivative requires positive argument");
      return {0.5 / v, -0.25 / (v * x)};
    case Op::kExp: return {v, v};
    case Op::kLog: return {1.0 / x, -1.0 / (x * x)};
    case Op::kSin: return {std::cos(x), -std::sin(x)};
    case Op::kCos: return {-std::sin(x), -std::cos(x)};
    case Op::kSignedSquare:
      return {2.0 * std::abs(x), x > 0.0 ? 2.0 : (x < 0.0 ? -2.0 : 0.0)};
    case Op::kPowInt: {
      const int k = t.exponent;
      double d1 = (k == 0) ? 0.0 : k * ipow(x, k - 1);
      long long c2 = (long long)k * (k - 1);
      double d2 = (c2 == 0) ? 0.0 : (double)c2 * ipow(x, k - 2);
      return {d1, d2};
    }
    default: domain_fail(t.op, "not unary");
  }
}

void forward_values(const Tape& tape, std::span<const double> x,
                    DerivativeWorkspace& ws) {
  ws.resize_for(tape);
  const auto& nodes = tape.nodes();
  for (size_t i = 0; i < nodes.size(); ++i) {
    const TapeNode& t = nodes[i];
    double v;
    switch (t.op) {
      case Op::kConst: v = t.constant; break;
      case Op::kVar: v = x[t.slot]; break;
      case Op::kNeg: v = -ws.val[t.a]; break;
      case Op::kSquare: v = ws.val[t.a] * ws.val[t.a]; break;
      case Op::kSqrt:
        if (ws.val[t.a] < 0.0) domain_fail(t.op, "negative argument");
        v = std::sqrt(ws.val[t.a]);
        break;
      case Op::kExp: v = std::exp(ws.val[t.a]); break;
      case Op::kLog:
        if (ws.val[t.a] <= 0.0) domain_fail(t.op, "non-positive argument");
        v = std::log(ws.val[t.a]);
        break;
      case Op::kSin: v = std::sin(ws.val[t.a]); break;
      case Op::kCos: v = std::cos(ws.val[t.a]); break;
      case Op::kSignedSquare:
        v = ws.val[t.a] * std::abs(ws.val[t.a]);
        break;
      case Op::kPowInt:
        if (ws.val[t.a] == 0.0 && t.exponent < 0)
          domain_fail(t.op, "zero base with negative exponent");
        v = ipow(ws.val[t.a], t.exponent);
        break;
      case Op::kAdd: v = ws.val[t.a] + ws.val[t.b]; break;
      case Op::kSub: v = ws.val[t.a] - ws.val[t.b]; break;
      case Op::kMul: v = ws.val[t.a] * ws.val[t.b]; break;
      case Op::kDiv:
        if (ws.val[t.b] == 0.0) domain_fail(t.op, "division by zero");
        v = ws.val[t.a] / ws.val[t.b];
        break;
      default: domain_fail(t.op, "unknown operator");
    }
    if (!std::isfinite(v)) domain_fail(t.op, "non-finite value");
    ws.val[i] = v;
  }
}

// Reverse sweep for adjoints only; assumes forward_values ran.
void reverse_adjoints(const Tape& tape, DerivativeWorkspace& ws, double seed) {
  const auto& nodes = tape.nodes();
  const int n = tape.num_nodes();
  std::fill_n(ws.bar.begin(), n, 0.0);
  ws.bar[n - 1] = seed;
  for (int i = n - 1; i >= 0; --i) {
    const TapeNode& t = nodes[i];
    const double w = ws.bar[i];
    if (t.op == Op::kConst || t.op == Op::kVar) continue;
    if (is_binary(t.op)) {
      const double a = ws.val[t.a], b = ws.val[t.b];
      switch (t.op) {
        case Op::kAdd:
          ws.bar[t.a] += w;
          ws.bar[t.b] += w;
          break;
        case Op::kSub:
          ws.bar[t.a] += w;
          ws.bar[t.b] -= w;
          break;
        case Op::kMul:
          ws.bar[t.a] += b * w;
          ws.bar[t.b] += a * w;
          break;
        case Op::kDiv:
          ws.bar[t.a] += w / b;
          ws.bar[t.b] -= w * a / (b * b);
          break;
        default: break;
      }
    } else {
      if (w == 0.0) continue;
      UnaryD d = unary_partials(t, ws.val[t.a], ws.val[i]);
      ws.bar[t.a] += d.d1 * w;
    }
  }
}

}  // namespace

double eval(const Tape& tape, std::span<const double> x,
            DerivativeWorkspace& ws) {
  if (tape.num_nodes() == 0) throw Error("empty tape");
  forward_values(tape, x, ws);
  return ws.val[tape.num_nodes() - 1];
}

double eval_gradient(const Tape& tape, std::span<const double> x,
                     DerivativeWorkspace& ws, std::span<double> grad_out) {
  double v = eval(tape, x, ws);
  reverse_adjoints(tape, ws, 1.0);
  std::fill_n(ws.grad.begin(), tape.num_vars(), 0.0);
  const auto& nodes = tape.nodes();
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].op == Op::kVar) ws.grad[nodes[i].slot] += ws.bar[i];
  for (int s = 0; s < tape.num_vars(); ++s) {
    if (!std::isfinite(ws.grad[s]))
      throw DomainError("non-finite gradient entry");
    grad_out[s] = ws.grad[s];
  }
  return v;
}

double eval_hessian(const Tape& tape, std::span<const double> x, double scale,
                    DerivativeWorkspace& ws, std::span<double> pair_values) {
  double v = eval(tape, x, ws);
  const auto& pairs = tape.hessian_pairs();
  if (pairs.empty()) return v;
  reverse_adjoints(tape, ws, scale);

  const auto& nodes = tape.nodes();
  const int n = tape.num_nodes();
  // One forward-tangent plus reverse-tangent sweep per participating column.
  std::vector<double>& hcol = ws.grad;
  for (std::int32_t s = 0; s < tape.num_vars(); ++s) {
    bool used = false;
    for (const auto& pr : pairs)
      if (pr.second == s) { used = true; break; }
    if (!used) continue;

    // forward tangent
    for (int i = 0; i < n; ++i) {
      const TapeNode& t = nodes[i];
      double dv = 0.0;
      switch (t.op) {
        case Op::kConst: break;
        case Op::kVar: dv = (t.slot == s) ? 1.0 : 0.0; break;
        case Op::kAdd: dv = ws.dot[t.a] + ws.dot[t.b]; break;
        case Op::kSub: dv = ws.dot[t.a] - ws.dot[t.b]; break;
        case Op::kMul:
          dv = ws.dot[t.a] * ws.val[t.b] + ws.val[t.a] * ws.dot[t.b];
          break;
        case Op::kDiv: {
          const double b = ws.val[t.b];
          dv = ws.dot[t.a] / b - ws.val[t.a] * ws.dot[t.b] / (b * b);
          break;
        }
        default: {
          UnaryD d = unary_partials(t, ws.val[t.a], ws.val[i]);
          dv = d.d1 * ws.dot[t.a];
          break;
        }
      }
      ws.dot[i] = dv;
    }

    // reverse adjoint tangent
    std::fill_n(ws.bardot.begin(), n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
      const TapeNode& t = nodes[i];
      if (t.op == Op::kConst || t.op == Op::kVar) continue;
      const double w = ws.bar[i], wd = ws.bardot[i];
      switch (t.op) {
        case Op::kAdd:
          ws.bardot[t.a] += wd;
          ws.bardot[t.b] += wd;
          break;
        case Op::kSub:
          ws.bardot[t.a] += wd;
          ws.bardot[t.b] -= wd;
          break;
        case Op::kMul:
          ws.bardot[t.a] += ws.val[t.b] * wd + ws.dot[t.b] * w;
          ws.bardot[t.b] += ws.val[t.a] * wd + ws.dot[t.a] * w;
          break;
        case Op::kDiv: {
          const double a = ws.val[t.a], b = ws.val[t.b];
          const double da = ws.dot[t.a], db = ws.dot[t.b];
          ws.bardot[t.a] += wd / b - w * db / (b * b);
          ws.bardot[t.b] += -wd * a / (b * b) +
                            w * (-da / (b * b) + 2.0 * a * db / (b * b * b));
          break;
        }
        default: {
          if (w == 0.0 && wd == 0.0) continue;
          UnaryD d = unary_partials(t, ws.val[t.a], ws.val[i]);
          ws.bardot[t.a] += d.d1 * wd + d.d2 * ws.dot[t.a] * w;
          break;
        }
      }
    }

    std::fill_n(hcol.begin(), tape.num_vars(), 0.0);
    for (int i = 0; i < n; ++i)
      if (nodes[i].op == Op::kVar) hcol[nodes[i].slot] += ws.bardot[i];
    for (size_t q = 0; q < pairs.size(); ++q) {
      if (pairs[q].second != s) continue;
      const double h = hcol[pairs[q].first];
      if (!std::isfinite(h)) throw DomainError("non-finite Hessian entry");
      pair_values[q] = h;
    }
  }
  return v;
}

}  // namespace gnlp
