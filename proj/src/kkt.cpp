#include "graphnlp/kkt.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace gnlp {

KktSystem::KktSystem(const Nlp& nlp) : nlp_(&nlp) {
  n_ = nlp.num_vars();
  m_ = nlp.num_cons();
  const SparsityPattern& hp = nlp.hessian_pattern();
  const SparsityPattern& jp = nlp.jacobian_pattern();

  pattern_.rows.reserve(hp.nnz() + n_ + jp.nnz() + m_);
  pattern_.cols.reserve(hp.nnz() + n_ + jp.nnz() + m_);
  hess_slot_.resize(hp.nnz());
  jac_slot_.resize(jp.nnz());
  primal_diag_slot_.assign(n_, -1);
  dual_diag_slot_.assign(m_, -1);

  auto push = [this](int r, int c) {
    pattern_.rows.push_back(r);
    pattern_.cols.push_back(c);
    return static_cast<int>(pattern_.rows.size()) - 1;
  };

  for (int k = 0; k < hp.nnz(); ++k) {
    const int slot = push(hp.rows[k], hp.cols[k]);
    hess_slot_[k] = slot;
    if (hp.rows[k] == hp.cols[k]) primal_diag_slot_[hp.rows[k]] = slot;
  }
  for (int j = 0; j < n_; ++j)
    if (primal_diag_slot_[j] < 0) primal_diag_slot_[j] = push(j, j);
  for (int k = 0; k < jp.nnz(); ++k)
    jac_slot_[k] = push(n_ + jp.rows[k], jp.cols[k]);
  for (int i = 0; i < m_; ++i) dual_diag_slot_[i] = push(n_ + i, n_ + i);

  values_.setZero(pattern_.nnz());
  rhs_.setZero(n_ + m_);
  sigma_.setZero(n_);
  diag_base_.setZero(n_);
  hess_vals_.setZero(hp.nnz());
  jac_vals_.setZero(jp.nnz());
  grad_.setZero(n_);
  cons_.setZero(m_);
}

void KktSystem::assemble(const PrimalDualPoint& point, double mu,
                         double delta_w, double delta_c) {
  const Eigen::VectorXd& x = point.x;
  const Eigen::VectorXd& lb = nlp_->lower();
  const Eigen::VectorXd& ub = nlp_->upper();

  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb[j]) && !(x[j] > lb[j] && point.zl[j] > 0.0))
      throw NotInterior("variable " + std::to_string(j) +
                        " violates strict interiority at its lower bound");
    if (std::isfinite(ub[j]) && !(x[j] < ub[j] && point.zu[j] > 0.0))
      throw NotInterior("variable " + std::to_string(j) +
                        " violates strict interiority at its upper bound");
  }

  nlp_->hessian(x, point.lambda, 1.0, hess_vals_);
  nlp_->jacobian(x, jac_vals_);
  nlp_->gradient(x, grad_);
  nlp_->constraints(x, cons_);

  const SparsityPattern& hp = nlp_->hessian_pattern();
  const SparsityPattern& jp = nlp_->jacobian_pattern();

  values_.setZero();
  for (int k = 0; k < hp.nnz(); ++k) values_[hess_slot_[k]] += hess_vals_[k];

  // ||W||_inf = max absolute row sum over the symmetric Hessian
  Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n_);
  for (int k = 0; k < hp.nnz(); ++k) {
    row_sum[hp.rows[k]] += std::abs(hess_vals_[k]);
    if (hp.rows[k] != hp.cols[k]) row_sum[hp.cols[k]] += std::abs(hess_vals_[k]);
  }
  w_inf_norm_ = n_ > 0 ? row_sum.maxCoeff() : 0.0;

  // barrier curvature and barrier gradient over the finite bounds
  Eigen::VectorXd grad_phi = grad_;
  for (int j = 0; j < n_; ++j) {
    double s = 0.0;
    if (std::isfinite(lb[j])) {
      const double gap = x[j] - lb[j];
      s += point.zl[j] / gap;
      grad_phi[j] -= mu / gap;
    }
    if (std::isfinite(ub[j])) {
      const double gap = ub[j] - x[j];
      s += point.zu[j] / gap;
      grad_phi[j] += mu / gap;
    }
    sigma_[j] = s;
    diag_base_[j] = values_[primal_diag_slot_[j]] + s;
  }

  for (int k = 0; k < jp.nnz(); ++k) values_[jac_slot_[k]] = jac_vals_[k];

  rhs_.head(n_) = -grad_phi;
  for (int k = 0; k < jp.nnz(); ++k)
    rhs_[jp.cols[k]] -= jac_vals_[k] * point.lambda[jp.rows[k]];
  rhs_.tail(m_) = -cons_;

  mu_ = mu;
  set_deltas(delta_w, delta_c);
}

void KktSystem::set_deltas(double delta_w, double delta_c) {
  delta_w_ = delta_w;
  delta_c_ = delta_c;
  for (int j = 0; j < n_; ++j)
    values_[primal_diag_slot_[j]] = diag_base_[j] + delta_w;
  for (int i = 0; i < m_; ++i) values_[dual_diag_slot_[i]] = -delta_c;
}

void KktSystem::recover_bound_step(const PrimalDualPoint& point,
                                   const Eigen::VectorXd& dx, double mu,
                                   Eigen::VectorXd& dzl,
                                   Eigen::VectorXd& dzu) const {
  const Eigen::VectorXd& lb = nlp_->lower();
  const Eigen::VectorXd& ub = nlp_->upper();
  dzl.setZero(n_);
  dzu.setZero(n_);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb[j])) {
      const double gap = point.x[j] - lb[j];
      dzl[j] = (mu - gap * point.zl[j] - point.zl[j] * dx[j]) / gap;
    }
    if (std::isfinite(ub[j])) {
      const double gap = ub[j] - point.x[j];
      dzu[j] = (mu - gap * point.zu[j] + point.zu[j] * dx[j]) / gap;
    }
  }
}

Eigen::VectorXd KktSystem::matvec(const Eigen::VectorXd& v) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(size());
  for (int k = 0; k < pattern_.nnz(); ++k) {
    const int r = pattern_.rows[k];
    const int c = pattern_.cols[k];
    y[r] += values_[k] * v[c];
    if (r != c) y[c] += values_[k] * v[r];
  }
  return y;
}

void KktSystem::dump(std::ostream& out) const {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out.precision(17);
  for (int k = 0; k < pattern_.nnz(); ++k)
    out << pattern_.rows[k] + 1 << ' ' << pattern_.cols[k] + 1 << ' '
        << values_[k] << '\n';
  out.flags(flags);
  out.precision(precision);
}

}  // namespace gnlp
