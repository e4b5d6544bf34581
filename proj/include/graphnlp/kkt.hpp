#pragma once

#include <iosfwd>

#include "graphnlp/nlp.hpp"

namespace gnlp {

/// Regularized primal-dual Newton system at an interior iterate,
///
///   M = [ W + Sigma + delta_w I   A^T        ]   p = -[ grad_phi + A^T lambda ]
///       [ A                       -delta_c I ]        [ c(x)                  ]
///
/// kept as the lower triangle in triplet form. Sigma condenses the bound
/// complementarity rows: Sigma_jj = zl_j/(x_j-l_j) + zu_j/(u_j-x_j) over the
/// finite bounds, and grad_phi is the barrier gradient
/// grad f - mu/(x-l) + mu/(u-x). Bound-multiplier steps are recovered from a
/// primal-dual solution afterwards, which reproduces an exact solution of
/// the unreduced Newton linearization.
///
/// The pattern is the union of the Hessian pattern, the full primal
/// diagonal, the Jacobian block at rows n..n+m-1, and the dual diagonal; it
/// is built once and never changes, only values() does.
class KktSystem {
 public:
  explicit KktSystem(const Nlp& nlp);

  /// Evaluates the oracles at the point and fills values() and rhs().
  /// Throws NotInterior when a bounded component sits on or outside its
  /// bound or a bound multiplier is not positive.
  void assemble(const PrimalDualPoint& point, double mu, double delta_w,
                double delta_c);

  /// Rewrites only the regularized diagonals, keeping the oracle values of
  /// the last assemble(). Used when a factorization attempt rejects the
  /// current deltas.
  void set_deltas(double delta_w, double delta_c);

  /// Newton step of the condensed complementarity equations:
  ///   dzl_j = (mu - (x_j-l_j) zl_j - zl_j dx_j)/(x_j-l_j)
  ///   dzu_j = (mu - (u_j-x_j) zu_j + zu_j dx_j)/(u_j-x_j)
  /// Entries without the matching bound are 0.
  void recover_bound_step(const PrimalDualPoint& point,
                          const Eigen::VectorXd& dx, double mu,
                          Eigen::VectorXd& dzl, Eigen::VectorXd& dzu) const;

  /// y = M v expanded from the stored lower triangle.
  Eigen::VectorXd matvec(const Eigen::VectorXd& v) const;

  /// Coordinate dump "i j value" (1-based, lower triangle, one per line).
  void dump(std::ostream& out) const;

  int size() const { return n_ + m_; }
  int num_primal() const { return n_; }
  int num_dual() const { return m_; }
  const SparsityPattern& pattern() const { return pattern_; }
  const Eigen::VectorXd& values() const { return values_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  double delta_w() const { return delta_w_; }
  double delta_c() const { return delta_c_; }
  double mu() const { return mu_; }
  /// Infinity norm of the Lagrangian Hessian W from the last assemble();
  /// seeds the primal regularization delta_w.
  double w_inf_norm() const { return w_inf_norm_; }
  const Nlp& nlp() const { return *nlp_; }

 private:
  const Nlp* nlp_;
  int n_{0}, m_{0};
  SparsityPattern pattern_;
  Eigen::VectorXd values_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd sigma_;      // condensed bound curvature, length n
  Eigen::VectorXd diag_base_;  // W_jj + Sigma_jj without delta_w, length n
  std::vector<int> hess_slot_;         // Hessian pattern entry -> slot
  std::vector<int> jac_slot_;          // Jacobian pattern entry -> slot
  std::vector<int> primal_diag_slot_;  // variable -> slot of (j,j)
  std::vector<int> dual_diag_slot_;    // constraint -> slot of (n+i,n+i)
  Eigen::VectorXd hess_vals_, jac_vals_, grad_, cons_;  // oracle scratch
  double delta_w_{0.0}, delta_c_{0.0}, mu_{0.0};
  double w_inf_norm_{0.0};
};

}  // namespace gnlp
