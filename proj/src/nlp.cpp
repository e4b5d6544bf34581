#include "graphnlp/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "graphnlp/parallel.hpp"

namespace gnlp {

namespace {

double default_start(double lb, double ub) {
  const bool lfin = std::isfinite(lb), ufin = std::isfinite(ub);
  if (lfin && ufin) return 0.5 * (lb + ub);
  if (lfin) return lb < 1.0 ? 1.0 : lb + 1.0;
  if (ufin) return ub > 1.0 ? 1.0 : ub - 1.0;
  return 1.0;
}

thread_local DerivativeWorkspace tls_ws;
thread_local std::vector<double> tls_x;
thread_local std::vector<double> tls_g;

// Gather the flat point into tape-slot order.
std::span<const double> gather(const std::vector<int>& var_flat,
                               const Eigen::VectorXd& x) {
  tls_x.resize(var_flat.size());
  for (size_t s = 0; s < var_flat.size(); ++s) tls_x[s] = x[var_flat[s]];
  return tls_x;
}

[[noreturn]] void trial_failure(int node, const std::string& what,
                                const DomainError& e) {
  throw TrialPointFailure("node " + std::to_string(node + 1) + ", " + what +
                          ": " + e.what());
}

}  // namespace

// ---- flatten ----------------------------------------------------------------

StandardNlp OptiGraph::flatten() const {
  if (num_nodes_ == 0 || vars_.empty())
    throw EmptyModel("model has no variables");

  StandardNlp nlp;
  nlp.model_ = std::make_shared<const OptiGraph>(*this);
  const OptiGraph& g = *nlp.model_;
  const int nn = g.num_nodes();
  nlp.num_nodes_ = nn;

  // Group variable and constraint indices by owning node, preserving
  // declaration order; inner constraints come before link constraints.
  std::vector<std::vector<int>> node_vars(nn), node_cons(nn);
  for (int v = 0; v < g.num_variables(); ++v)
    node_vars[g.variable(v).node - 1].push_back(v);
  for (int c = 0; c < g.num_constraints(); ++c)
    if (!g.constraint(c).link) node_cons[g.constraint(c).node - 1].push_back(c);
  for (int c = 0; c < g.num_constraints(); ++c)
    if (g.constraint(c).link) node_cons[g.constraint(c).node - 1].push_back(c);

  // Count flat sizes: one slack per inequality, owned by the owner node.
  std::vector<int> flat_of_var(g.num_variables(), -1);
  std::vector<int> row_of_con(g.num_constraints(), -1);
  std::vector<int> slack_of_con(g.num_constraints(), -1);
  nlp.primal_begin_.assign(nn + 1, 0);
  nlp.dual_begin_.assign(nn + 1, 0);

  int n = 0, m = 0;
  for (int nd = 0; nd < nn; ++nd) {
    nlp.primal_begin_[nd] = n;
    nlp.dual_begin_[nd] = m;
    for (int v : node_vars[nd]) flat_of_var[v] = n++;
    for (int c : node_cons[nd]) {
      row_of_con[c] = m++;
      if (g.constraint(c).sense != Sense::kEq) slack_of_con[c] = n++;
    }
  }
  nlp.primal_begin_[nn] = n;
  nlp.dual_begin_[nn] = m;
  nlp.n_ = n;
  nlp.m_ = m;

  // Bounds, starts and names for declared variables.
  nlp.lb_ = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  nlp.ub_ = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  nlp.start_.resize(n);
  nlp.var_names_.assign(n, "");
  nlp.var_node_.assign(n, 0);
  nlp.con_names_.assign(m, "");
  nlp.con_node_.assign(m, 0);

  for (int v = 0; v < g.num_variables(); ++v) {
    const VariableInfo& info = g.variable(v);
    const int j = flat_of_var[v];
    nlp.lb_[j] = info.lb;
    nlp.ub_[j] = info.ub;
    nlp.start_[j] =
        std::isnan(info.start) ? default_start(info.lb, info.ub) : info.start;
    nlp.var_names_[j] =
        info.name.empty() ? "v" + std::to_string(v) : info.name;
    nlp.var_node_[j] = info.node - 1;
  }

  // Start point over model variables, needed to seed slack starts.
  const ExprPool& pool = g.pool();
  std::vector<double> model_start(g.num_variables());
  for (int v = 0; v < g.num_variables(); ++v)
    model_start[v] = nlp.start_[flat_of_var[v]];

  // Compile everything and build the global patterns.
  nlp.node_objective_.resize(nn);
  nlp.node_constraints_.resize(nn);
  std::vector<std::pair<int, int>> hess_entries;  // (row>=col) flat pairs

  auto compile_into =
      [&](std::int32_t expr_id) -> StandardNlp::CompiledExpr {
    StandardNlp::CompiledExpr ce;
    ce.tape = Tape::compile(pool, pool.handle(expr_id));
    ce.var_flat.resize(ce.tape.num_vars());
    for (int s = 0; s < ce.tape.num_vars(); ++s)
      ce.var_flat[s] = flat_of_var[ce.tape.variables()[s]];
    for (const auto& [sa, sb] : ce.tape.hessian_pairs()) {
      int i = ce.var_flat[sa], j = ce.var_flat[sb];
      if (i < j) std::swap(i, j);
      hess_entries.emplace_back(i, j);
    }
    return ce;
  };

  for (int t = 0; t < g.num_objective_terms(); ++t) {
    const ObjectiveTerm& term = g.objective_term(t);
    nlp.node_objective_[term.node - 1].push_back(compile_into(term.expr));
  }

  // Constraints in flat row order so the Jacobian pattern is row-sorted.
  DerivativeWorkspace ws;
  for (int nd = 0; nd < nn; ++nd) {
    for (int c : node_cons[nd]) {
      const ConstraintInfo& info = g.constraint(c);
      StandardNlp::CompiledExpr ce = compile_into(info.expr);
      ce.row = row_of_con[c];
      ce.rhs = info.rhs;
      nlp.con_names_[ce.row] =
          info.name.empty() ? "c" + std::to_string(c) : info.name;
      nlp.con_node_[ce.row] = nd;
      if (info.sense != Sense::kEq) {
        ce.slack_flat = slack_of_con[c];
        ce.slack_sign = info.sense == Sense::kLe ? 1.0 : -1.0;
        const int j = ce.slack_flat;
        nlp.lb_[j] = 0.0;
        nlp.ub_[j] = std::numeric_limits<double>::infinity();
        nlp.var_names_[j] = nlp.con_names_[ce.row] + "_slack";
        nlp.var_node_[j] = nd;
        double s0 = 1.0;
        try {
          std::vector<double> xb(ce.tape.num_vars());
          for (int s = 0; s < ce.tape.num_vars(); ++s)
            xb[s] = model_start[ce.tape.variables()[s]];
          const double e0 = eval(ce.tape, xb, ws);
          s0 = ce.slack_sign * (info.rhs - e0);
        } catch (const DomainError&) {
          // fall back to 1.0; the interior initializer will adjust anyway
        }
        nlp.start_[j] = std::max(s0, 1e-2);
      }
      nlp.node_constraints_[nd].push_back(std::move(ce));
    }
  }

  // Jacobian pattern: rows in order, columns ascending within each row.
  for (int nd = 0; nd < nn; ++nd) {
    for (auto& ce : nlp.node_constraints_[nd]) {
      std::vector<std::pair<int, int>> cols;  // (flat col, tape slot)
      cols.reserve(ce.var_flat.size() + 1);
      for (size_t s = 0; s < ce.var_flat.size(); ++s)
        cols.emplace_back(ce.var_flat[s], static_cast<int>(s));
      if (ce.slack_flat >= 0) cols.emplace_back(ce.slack_flat, -1);
      std::sort(cols.begin(), cols.end());
      ce.jac_slots.assign(ce.var_flat.size(), -1);
      for (const auto& [col, slot] : cols) {
        const int pattern_slot = nlp.jac_.nnz();
        nlp.jac_.rows.push_back(ce.row);
        nlp.jac_.cols.push_back(col);
        if (slot >= 0)
          ce.jac_slots[slot] = pattern_slot;
        else
          ce.slack_jac_slot = pattern_slot;
      }
    }
  }

  // Hessian pattern: sorted unique lower-triangle pairs.
  std::sort(hess_entries.begin(), hess_entries.end());
  hess_entries.erase(std::unique(hess_entries.begin(), hess_entries.end()),
                     hess_entries.end());
  nlp.hess_.rows.reserve(hess_entries.size());
  nlp.hess_.cols.reserve(hess_entries.size());
  for (const auto& [i, j] : hess_entries) {
    nlp.hess_.rows.push_back(i);
    nlp.hess_.cols.push_back(j);
  }
  auto hess_slot_of = [&](int i, int j) {
    if (i < j) std::swap(i, j);
    auto it = std::lower_bound(hess_entries.begin(), hess_entries.end(),
                               std::make_pair(i, j));
    return static_cast<int>(it - hess_entries.begin());
  };
  auto fill_hess_slots = [&](StandardNlp::CompiledExpr& ce) {
    ce.hess_slots.reserve(ce.tape.hessian_pairs().size());
    for (const auto& [sa, sb] : ce.tape.hessian_pairs())
      ce.hess_slots.push_back(
          hess_slot_of(ce.var_flat[sa], ce.var_flat[sb]));
  };
  for (int nd = 0; nd < nn; ++nd) {
    for (auto& ce : nlp.node_objective_[nd]) fill_hess_slots(ce);
    for (auto& ce : nlp.node_constraints_[nd]) fill_hess_slots(ce);
  }

  // Per-node scratch for deterministic Hessian merging.
  nlp.hess_scratch_.resize(nn);
  for (int nd = 0; nd < nn; ++nd) {
    size_t total = 0;
    for (const auto& ce : nlp.node_objective_[nd])
      total += ce.hess_slots.size();
    for (const auto& ce : nlp.node_constraints_[nd])
      total += ce.hess_slots.size();
    nlp.hess_scratch_[nd].resize(total);
  }

  // Graph structure handed to the partitioner.
  nlp.adjacency_.resize(nn);
  for (int nd = 0; nd < nn; ++nd) {
    const auto& nbrs = g.neighbors(nd + 1);
    nlp.adjacency_[nd].reserve(nbrs.size());
    for (NodeId nb : nbrs) nlp.adjacency_[nd].push_back(nb - 1);
  }
  nlp.index_sets_.resize(nn);
  for (int nd = 0; nd < nn; ++nd) {
    auto& u = nlp.index_sets_[nd];
    for (int j = nlp.primal_begin_[nd]; j < nlp.primal_begin_[nd + 1]; ++j)
      u.push_back(j);
    for (int r = nlp.dual_begin_[nd]; r < nlp.dual_begin_[nd + 1]; ++r)
      u.push_back(n + r);
  }
  return nlp;
}

// ---- oracles ----------------------------------------------------------------

void StandardNlp::set_threads(int threads) {
  threads_ = std::max(1, threads);
}

double StandardNlp::objective(const Eigen::VectorXd& x) const {
  std::vector<double> partial(num_nodes_, 0.0);
  parallel_for(num_nodes_, threads_, [&](int nd) {
    double sum = 0.0;
    for (const auto& ce : node_objective_[nd]) {
      try {
        sum += eval(ce.tape, gather(ce.var_flat, x), tls_ws);
      } catch (const DomainError& e) {
        trial_failure(nd, "objective term", e);
      }
    }
    partial[nd] = sum;
  });
  double total = 0.0;  // serial merge in node order: thread-count invariant
  for (int nd = 0; nd < num_nodes_; ++nd) total += partial[nd];
  return total;
}

void StandardNlp::gradient(const Eigen::VectorXd& x,
                           Eigen::VectorXd& grad) const {
  grad.setZero(n_);
  // Objective terms are node-local, so nodes write disjoint entries and the
  // within-node accumulation order is fixed: deterministic in parallel.
  parallel_for(num_nodes_, threads_, [&](int nd) {
    for (const auto& ce : node_objective_[nd]) {
      tls_g.resize(ce.tape.num_vars());
      try {
        eval_gradient(ce.tape, gather(ce.var_flat, x), tls_ws, tls_g);
      } catch (const DomainError& e) {
        trial_failure(nd, "objective term", e);
      }
      for (int s = 0; s < ce.tape.num_vars(); ++s)
        grad[ce.var_flat[s]] += tls_g[s];
    }
  });
}

void StandardNlp::eval_node_constraints(int nd, const Eigen::VectorXd& x,
                                        Eigen::VectorXd* c,
                                        Eigen::VectorXd* jac) const {
  for (const auto& ce : node_constraints_[nd]) {
    try {
      if (jac != nullptr) {
        tls_g.resize(ce.tape.num_vars());
        const double v =
            eval_gradient(ce.tape, gather(ce.var_flat, x), tls_ws, tls_g);
        for (int s = 0; s < ce.tape.num_vars(); ++s)
          (*jac)[ce.jac_slots[s]] = tls_g[s];
        if (ce.slack_flat >= 0) (*jac)[ce.slack_jac_slot] = ce.slack_sign;
        if (c != nullptr) {
          (*c)[ce.row] = v - ce.rhs;
          if (ce.slack_flat >= 0)
            (*c)[ce.row] += ce.slack_sign * x[ce.slack_flat];
        }
      } else if (c != nullptr) {
        double v = eval(ce.tape, gather(ce.var_flat, x), tls_ws);
        (*c)[ce.row] = v - ce.rhs;
        if (ce.slack_flat >= 0)
          (*c)[ce.row] += ce.slack_sign * x[ce.slack_flat];
      }
    } catch (const DomainError& e) {
      trial_failure(nd, "constraint " + con_names_[ce.row], e);
    }
  }
}

void StandardNlp::constraints(const Eigen::VectorXd& x,
                              Eigen::VectorXd& c) const {
  c.resize(m_);
  parallel_for(num_nodes_, threads_,
               [&](int nd) { eval_node_constraints(nd, x, &c, nullptr); });
}

void StandardNlp::jacobian(const Eigen::VectorXd& x,
                           Eigen::VectorXd& values) const {
  values.resize(jac_.nnz());
  parallel_for(num_nodes_, threads_,
               [&](int nd) { eval_node_constraints(nd, x, nullptr, &values); });
}

void StandardNlp::hessian(const Eigen::VectorXd& x,
                          const Eigen::VectorXd& lambda, double obj_scale,
                          Eigen::VectorXd& values) const {
  // Phase 1 (parallel): per-node contributions into preallocated scratch.
  parallel_for(num_nodes_, threads_, [&](int nd) {
    auto& scratch = hess_scratch_[nd];
    size_t cursor = 0;
    auto emit = [&](const CompiledExpr& ce, double scale, const char* what) {
      const size_t count = ce.hess_slots.size();
      if (count == 0) return;
      if (scale == 0.0) {
        std::fill_n(scratch.begin() + cursor, count, 0.0);
      } else {
        try {
          eval_hessian(ce.tape, gather(ce.var_flat, x), scale, tls_ws,
                       std::span<double>(scratch.data() + cursor, count));
        } catch (const DomainError& e) {
          trial_failure(nd, what, e);
        }
      }
      cursor += count;
    };
    for (const auto& ce : node_objective_[nd])
      emit(ce, obj_scale, "objective term");
    for (const auto& ce : node_constraints_[nd])
      emit(ce, lambda[ce.row], "constraint");
  });

  // Phase 2 (serial, fixed node order): merge. Link constraints of adjacent
  // nodes may hit the same entry, so merging in parallel would race and
  // reordering would change the floating-point result.
  values.setZero(hess_.nnz());
  for (int nd = 0; nd < num_nodes_; ++nd) {
    const auto& scratch = hess_scratch_[nd];
    size_t cursor = 0;
    for (const auto& ce : node_objective_[nd])
      for (int slot : ce.hess_slots) values[slot] += scratch[cursor++];
    for (const auto& ce : node_constraints_[nd])
      for (int slot : ce.hess_slots) values[slot] += scratch[cursor++];
  }
}

}  // namespace gnlp
