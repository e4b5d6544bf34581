#include "graphnlp/linalg.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <string>

#include "graphnlp/parallel.hpp"

namespace gnlp {

namespace {
// A refined LDLT solve above this relative residual means the pivotless
// elimination met a saddle point it cannot handle; the LU fallback takes
// over before the caller sees an unconverged solve.
constexpr double kResidualFallback = 1e-11;
}  // namespace

struct DirectFactor::SparseLdlt {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
};

struct DirectFactor::SparseLu {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
};

void DirectFactor::factor(const SparsityPattern& pattern,
                          const Eigen::VectorXd& values, int size) {
  pattern_ = pattern;
  values_ = values;
  size_ = size;
  compute();
}

void DirectFactor::refactor(const Eigen::VectorXd& values) {
  values_ = values;
  compute();
}

void DirectFactor::compute() {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(pattern_.nnz());
  for (int k = 0; k < pattern_.nnz(); ++k)
    trips.emplace_back(pattern_.rows[k], pattern_.cols[k], values_[k]);
  lower_.resize(size_, size_);
  lower_.setFromTriplets(trips.begin(), trips.end());

  sparse_.reset();
  lu_.reset();
  if (size_ == 0) return;

  sparse_ = std::make_shared<SparseLdlt>();
  sparse_->ldlt.compute(lower_);
  if (sparse_->ldlt.info() == Eigen::Success) {
    const auto& D = sparse_->ldlt.vectorD();
    if (D.allFinite() && !(D.array() == 0.0).any()) return;
  }
  sparse_.reset();
  build_lu();
}

void DirectFactor::build_lu() const {
  Eigen::SparseMatrix<double> full =
      lower_.selfadjointView<Eigen::Lower>();
  auto lu = std::make_shared<SparseLu>();
  lu->lu.compute(full);
  if (lu->lu.info() != Eigen::Success)
    throw SingularMatrix("symmetric factorization and LU fallback both failed");
  lu_ = std::move(lu);
}

Eigen::VectorXd DirectFactor::solve_once(const Eigen::VectorXd& b) const {
  if (lu_) return lu_->lu.solve(b);
  return sparse_->ldlt.solve(b);
}

Eigen::VectorXd DirectFactor::solve(const Eigen::VectorXd& b) const {
  if (size_ == 0) return Eigen::VectorXd();
  const double scale = 1.0 + b.norm();
  Eigen::VectorXd x = solve_once(b);
  Eigen::VectorXd r = b - lower_.selfadjointView<Eigen::Lower>() * x;
  if (r.norm() > 1e-14 * scale) {
    x += solve_once(r);
    r = b - lower_.selfadjointView<Eigen::Lower>() * x;
  }
  if (r.norm() > kResidualFallback * scale && !lu_) {
    build_lu();
    x = solve_once(b);
    r = b - lower_.selfadjointView<Eigen::Lower>() * x;
    if (r.norm() > 1e-14 * scale) {
      x += solve_once(r);
      r = b - lower_.selfadjointView<Eigen::Lower>() * x;
    }
  }
  last_residual_ = r.norm() / scale;
  if (!x.allFinite())
    throw SingularMatrix("factorized solve produced non-finite values");
  return x;
}

// ---- restricted additive Schwarz -------------------------------------------

RasPreconditioner::RasPreconditioner(const SparsityPattern& pattern,
                                     const Eigen::VectorXd& values, int size,
                                     SubdomainMap map, int threads)
    : pattern_(pattern),
      size_(size),
      map_(std::move(map)),
      threads_(threads) {
  build_block_structure();
  refresh(values);
}

void RasPreconditioner::build_block_structure() {
  const int K = map_.K;
  block_pattern_.assign(K, {});
  block_src_.assign(K, {});
  factors_.assign(K, {});
  // Entries whose row and column both lie in W_k^omega form block k. The
  // closures are sorted, so global lower-triangle entries stay lower
  // triangle under the local renumbering.
  std::vector<int> pos(size_, -1);
  for (int k = 0; k < K; ++k) {
    const std::vector<int>& we = map_.W_expanded[k];
    for (int i = 0; i < static_cast<int>(we.size()); ++i) pos[we[i]] = i;
    for (int t = 0; t < pattern_.nnz(); ++t) {
      const int pr = pos[pattern_.rows[t]];
      const int pc = pos[pattern_.cols[t]];
      if (pr >= 0 && pc >= 0) {
        block_pattern_[k].rows.push_back(pr);
        block_pattern_[k].cols.push_back(pc);
        block_src_[k].push_back(t);
      }
    }
    for (int idx : we) pos[idx] = -1;
  }
}

void RasPreconditioner::refresh(const Eigen::VectorXd& values) {
  parallel_for(map_.K, threads_, [&](int k) {
    Eigen::VectorXd vals(block_src_[k].size());
    for (std::size_t i = 0; i < block_src_[k].size(); ++i)
      vals[static_cast<Eigen::Index>(i)] = values[block_src_[k][i]];
    try {
      factors_[k].factor(block_pattern_[k], vals,
                         static_cast<int>(map_.W_expanded[k].size()));
    } catch (const SingularMatrix& e) {
      throw SubdomainSingular(
          k, "subdomain " + std::to_string(k) + ": " + e.what());
    }
  });
}

void RasPreconditioner::apply(const Eigen::VectorXd& r,
                              Eigen::VectorXd& out) const {
  out.setZero(size_);
  // Gathers read shared data; scatters write the disjoint W_k only, so the
  // result is identical for any thread count.
  parallel_for(map_.K, threads_, [&](int k) {
    const std::vector<int>& we = map_.W_expanded[k];
    Eigen::VectorXd rloc(we.size());
    for (std::size_t i = 0; i < we.size(); ++i)
      rloc[static_cast<Eigen::Index>(i)] = r[we[i]];
    const Eigen::VectorXd x = factors_[k].solve(rloc);
    const std::vector<int>& w = map_.W[k];
    const std::vector<int>& rp = map_.restrict_pos[k];
    for (std::size_t j = 0; j < w.size(); ++j) out[w[j]] = x[rp[j]];
  });
}

void RasPreconditioner::expand_overlap(const Eigen::VectorXd& values) {
  map_.expand_all(1);
  ++adaptations_;
  build_block_structure();
  refresh(values);
}

bool RasPreconditioner::centralized() const {
  // A block is saturated when its overlap hit the diameter cap or its
  // closure already spans every index (e.g. K=1 at any omega).
  for (int k = 0; k < map_.K; ++k)
    if (map_.omega[k] < map_.diameter &&
        static_cast<int>(map_.W_expanded[k].size()) != size_)
      return false;
  return true;
}

// ---- iterators --------------------------------------------------------------

IterStats richardson(const MatVec& M, const Eigen::VectorXd& p,
                     const Preconditioner& P, Eigen::VectorXd& d, double tol,
                     int maxit) {
  IterStats stats;
  const double scale = 1.0 + p.norm();
  d.setZero(p.size());
  Eigen::VectorXd r = p;
  Eigen::VectorXd z(p.size());
  double rn = r.norm();
  stats.residual_history.push_back(rn / scale);
  while (stats.iterations < maxit && rn > tol * scale && std::isfinite(rn)) {
    P(r, z);
    d += z;
    r = p - M(d);
    rn = r.norm();
    ++stats.iterations;
    stats.residual_history.push_back(rn / scale);
  }
  stats.relative_residual = rn / scale;
  stats.converged = std::isfinite(rn) && rn <= tol * scale;
  return stats;
}

IterStats gmres(const MatVec& M, const Eigen::VectorXd& p,
                const Preconditioner& P, Eigen::VectorXd& d, double tol,
                int maxit, int restart) {
  IterStats stats;
  const int n = static_cast<int>(p.size());
  const double scale = 1.0 + p.norm();
  d.setZero(n);
  restart = std::max(1, std::min(restart, n));

  Eigen::VectorXd r = p;
  double rn = r.norm();
  stats.residual_history.push_back(rn / scale);

  Eigen::MatrixXd V(n, restart + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
  Eigen::VectorXd cs(restart), sn(restart), g(restart + 1);
  Eigen::VectorXd z(n);

  while (stats.iterations < maxit && rn > tol * scale && std::isfinite(rn)) {
    const double beta = rn;
    V.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    int cols = 0;
    for (int j = 0; j < restart && stats.iterations < maxit; ++j) {
      P(V.col(j), z);
      Eigen::VectorXd w = M(z);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      const bool breakdown = H(j + 1, j) <= 1e-300;
      if (!breakdown) V.col(j + 1) = w / H(j + 1, j);

      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double h = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = h == 0.0 ? 1.0 : H(j, j) / h;
      sn[j] = h == 0.0 ? 0.0 : H(j + 1, j) / h;
      H(j, j) = h;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] *= cs[j];

      ++stats.iterations;
      cols = j + 1;
      stats.residual_history.push_back(std::abs(g[j + 1]) / scale);
      if (std::abs(g[j + 1]) <= tol * scale || breakdown) break;
    }
    if (cols > 0) {
      const Eigen::VectorXd y = H.topLeftCorner(cols, cols)
                                    .triangularView<Eigen::Upper>()
                                    .solve(g.head(cols));
      // right preconditioning: the update lives in P^{-1} span(V)
      Eigen::VectorXd u = V.leftCols(cols) * y;
      P(u, z);
      d += z;
    }
    r = p - M(d);
    rn = r.norm();
  }
  stats.relative_residual = rn / scale;
  stats.converged = std::isfinite(rn) && rn <= tol * scale;
  return stats;
}

bool adapt_overlap(RasPreconditioner& P, const Eigen::VectorXd& values) {
  if (P.centralized()) return false;
  P.expand_overlap(values);
  return true;
}

// ---- KKT solver driver -------------------------------------------------------

KktSolver::KktSolver(const Nlp& nlp, LinearSolverOptions options)
    : options_(options) {
  if (options_.kind == LinearSolverOptions::Kind::kRas) {
    const int k =
        std::max(1, std::min(options_.num_parts, nlp.num_graph_nodes()));
    options_.num_parts = k;
    initial_map_ =
        build_subdomains(nlp.adjacency(), nlp.index_sets(), k, options_.omega);
  }
}

void KktSolver::prepare(const KktSystem& K) {
  if (options_.kind == LinearSolverOptions::Kind::kDirect) {
    direct_.factor(K.pattern(), K.values(), K.size());
  } else if (!ras_) {
    ras_ = std::make_unique<RasPreconditioner>(
        K.pattern(), K.values(), K.size(), initial_map_, options_.threads);
  } else {
    ras_->refresh(K.values());
  }
  prepared_ = true;
}

IterStats KktSolver::solve(const KktSystem& K, const Eigen::VectorXd& rhs,
                           Eigen::VectorXd& d, double tol) {
  if (!prepared_) throw Error("KktSolver::solve before prepare");
  IterStats stats;
  if (options_.kind == LinearSolverOptions::Kind::kDirect) {
    d = direct_.solve(rhs);
    stats.iterations = 1;
    stats.relative_residual = direct_.last_relative_residual();
    stats.converged = stats.relative_residual <= tol;
    return stats;
  }

  const MatVec mv = [&K](const Eigen::VectorXd& v) { return K.matvec(v); };
  const Preconditioner pc = [this](const Eigen::VectorXd& r,
                                   Eigen::VectorXd& out) {
    ras_->apply(r, out);
  };
  const int adaptations_before = ras_->adaptations();
  for (;;) {
    stats = options_.iterator == LinearSolverOptions::Iterator::kRichardson
                ? richardson(mv, rhs, pc, d, tol, options_.maxit)
                : gmres(mv, rhs, pc, d, tol, options_.maxit, options_.restart);
    if (stats.converged || !adapt_overlap(*ras_, K.values())) break;
  }
  stats.overlap_adaptations = ras_->adaptations() - adaptations_before;
  return stats;
}

const SubdomainMap* KktSolver::subdomains() const {
  if (ras_) return &ras_->map();
  if (options_.kind == LinearSolverOptions::Kind::kRas) return &initial_map_;
  return nullptr;
}

}  // namespace gnlp
