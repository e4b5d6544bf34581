#pragma once

#include <Eigen/SparseCore>
#include <functional>
#include <memory>
#include <vector>

#include "graphnlp/kkt.hpp"
#include "graphnlp/partition.hpp"

namespace gnlp {

/// Outcome of one linear solve.
struct IterStats {
  int iterations{0};
  double relative_residual{0.0};  // ||p - M d|| / (1 + ||p||)
  bool converged{false};
  int overlap_adaptations{0};
  std::vector<double> residual_history;  // relative residual estimates
};

/// Symmetric indefinite factorization with repeated solves. Primary path is
/// a sparse LDLT without pivoting (sound for the quasi-definite matrices the
/// IPM produces once regularized); matrices it rejects, and solves whose
/// refined residual stays poor because a saddle point defeated the pivotless
/// elimination, fall back to a sparse LU with partial pivoting. solve()
/// applies one iterative-refinement step and records the achieved relative
/// residual. Throws SingularMatrix only when both factorizations fail.
class DirectFactor {
 public:
  /// Factorizes from lower-triangle triplets; duplicates are summed.
  /// Throws SingularMatrix.
  void factor(const SparsityPattern& pattern, const Eigen::VectorXd& values,
              int size);
  /// Refactorizes with new values on the pattern passed to factor().
  void refactor(const Eigen::VectorXd& values);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  double last_relative_residual() const { return last_residual_; }
  int size() const { return size_; }

 private:
  void compute();
  void build_lu() const;
  Eigen::VectorXd solve_once(const Eigen::VectorXd& b) const;

  SparsityPattern pattern_;
  Eigen::VectorXd values_;
  int size_{0};
  Eigen::SparseMatrix<double> lower_;  // lower triangle
  struct SparseLdlt;                   // hides Eigen/Cholesky from this header
  struct SparseLu;                     // hides Eigen/SparseLU from this header
  std::shared_ptr<SparseLdlt> sparse_;
  mutable std::shared_ptr<SparseLu> lu_;  // built on demand
  mutable double last_residual_{0.0};
};

/// Restricted additive Schwarz preconditioner P^{-1} = sum_k R~_k M_k^{-1} R_k^T
/// over a SubdomainMap: residuals are gathered on the overlapped closures
/// W_k^omega, each block M_k = M[W_k^omega, W_k^omega] is solved directly,
/// and results are scattered only on the non-overlapping W_k, whose
/// disjointness makes the application deterministic under any thread count.
class RasPreconditioner {
 public:
  /// Extracts and factorizes all blocks. Throws SubdomainSingular(k).
  RasPreconditioner(const SparsityPattern& pattern,
                    const Eigen::VectorXd& values, int size, SubdomainMap map,
                    int threads = 1);

  /// Refactorizes every block with new values on the original pattern.
  void refresh(const Eigen::VectorXd& values);

  /// out = P^{-1} r.
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& out) const;

  /// Grows every omega_k by one level (capped at the graph diameter, where
  /// the application becomes a direct solve) and refactorizes.
  void expand_overlap(const Eigen::VectorXd& values);

  const SubdomainMap& map() const { return map_; }
  int num_blocks() const { return map_.K; }
  int block_dim(int k) const { return static_cast<int>(map_.W_expanded[k].size()); }
  int adaptations() const { return adaptations_; }
  /// True when every block closure reaches the whole connected component,
  /// making the preconditioner exact.
  bool centralized() const;

 private:
  void build_block_structure();

  SparsityPattern pattern_;  // global lower triangle
  int size_{0};
  SubdomainMap map_;
  int threads_{1};
  int adaptations_{0};
  // per block: local lower-triangle pattern and the global slot feeding
  // each local entry
  std::vector<SparsityPattern> block_pattern_;
  std::vector<std::vector<int>> block_src_;
  std::vector<DirectFactor> factors_;
};

using MatVec = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Preconditioner =
    std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Undamped stationary iteration d <- d + P^{-1}(p - M d) from d = 0,
/// stopping at ||p - M d|| <= tol (1 + ||p||). Non-convergence is reported
/// in the stats, never thrown.
IterStats richardson(const MatVec& M, const Eigen::VectorXd& p,
                     const Preconditioner& P, Eigen::VectorXd& d, double tol,
                     int maxit = 200);

/// Right-preconditioned restarted GMRES with modified Gram-Schmidt, same
/// stopping rule as richardson(). Residual estimates within one restart
/// cycle are non-increasing.
IterStats gmres(const MatVec& M, const Eigen::VectorXd& p,
                const Preconditioner& P, Eigen::VectorXd& d, double tol,
                int maxit = 200, int restart = 100);

/// Grows the overlap after a convergence failure and refactorizes; returns
/// false when the preconditioner was already centralized (nothing to grow).
bool adapt_overlap(RasPreconditioner& P, const Eigen::VectorXd& values);

/// Linear-solver configuration shared by the IPM and the CLI.
struct LinearSolverOptions {
  enum class Kind { kDirect, kRas };
  enum class Iterator { kRichardson, kGmres };
  Kind kind{Kind::kDirect};
  Iterator iterator{Iterator::kRichardson};
  int num_parts{4};  // clamped to the number of graph nodes
  int omega{-1};     // -1 selects the automatic overlap rule
  int maxit{200};
  int restart{100};
  int threads{1};
};

/// Driver tying a KktSystem to the configured linear solver. The subdomain
/// map is built once (the problem graph never changes); block values are
/// refreshed every prepare(). On iterator failure the overlap is grown until
/// the preconditioner is centralized; remaining failures are reported for
/// the IPM to handle through regularization.
class KktSolver {
 public:
  KktSolver(const Nlp& nlp, LinearSolverOptions options);

  /// (Re)factorizes for the current values of K. Throws SingularMatrix or
  /// SubdomainSingular.
  void prepare(const KktSystem& K);

  /// Solves M d = rhs with the factors from the last prepare().
  IterStats solve(const KktSystem& K, const Eigen::VectorXd& rhs,
                  Eigen::VectorXd& d, double tol);

  const LinearSolverOptions& options() const { return options_; }
  const SubdomainMap* subdomains() const;
  int total_adaptations() const { return ras_ ? ras_->adaptations() : 0; }

 private:
  LinearSolverOptions options_;
  SubdomainMap initial_map_;  // kept for reference/reporting
  DirectFactor direct_;
  std::unique_ptr<RasPreconditioner> ras_;
  bool prepared_{false};
};

}  // namespace gnlp
