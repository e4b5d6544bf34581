#include "graphnlp/ipm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include "graphnlp/errors.hpp"
#include "graphnlp/kkt.hpp"
#include "graphnlp/nlp.hpp"

namespace gnlp {

const char* status_name(SolveReport::Status status) {
  switch (status) {
    case SolveReport::Status::kOptimal:
      return "optimal";
    case SolveReport::Status::kMaxIter:
      return "max_iter";
    case SolveReport::Status::kRestorationFailure:
      return "restoration_failure";
    case SolveReport::Status::kTrialPointFailure:
      return "trial_point_failure";
  }
  return "unknown";
}

double update_barrier(double mu, double tol) {
  return std::max(tol / 10.0, std::min(0.2 * mu, std::pow(mu, 1.5)));
}

bool curvature_test(double quadratic_form, double step_squared_norm) {
  return quadratic_form >= 1e-12 * step_squared_norm;
}

std::pair<double, double> fraction_to_boundary(const Eigen::VectorXd& lb,
                                               const Eigen::VectorXd& ub,
                                               const PrimalDualPoint& point,
                                               const Eigen::VectorXd& dx,
                                               const Eigen::VectorXd& dzl,
                                               const Eigen::VectorXd& dzu,
                                               double tau) {
  double alpha_pr = 1.0;
  double alpha_du = 1.0;
  for (int j = 0; j < static_cast<int>(lb.size()); ++j) {
    if (std::isfinite(lb[j])) {
      if (dx[j] < 0.0)
        alpha_pr = std::min(alpha_pr, -tau * (point.x[j] - lb[j]) / dx[j]);
      if (dzl[j] < 0.0) alpha_du = std::min(alpha_du, -tau * point.zl[j] / dzl[j]);
    }
    if (std::isfinite(ub[j])) {
      if (dx[j] > 0.0)
        alpha_pr = std::min(alpha_pr, tau * (ub[j] - point.x[j]) / dx[j]);
      if (dzu[j] < 0.0) alpha_du = std::min(alpha_du, -tau * point.zu[j] / dzu[j]);
    }
  }
  return {alpha_pr, alpha_du};
}

// ---- filter ----

void Filter::reset(double theta_max) {
  entries_.clear();
  entries_.emplace_back(theta_max, -std::numeric_limits<double>::infinity());
}

bool Filter::acceptable(double theta, double phi) const {
  for (const auto& [theta_f, phi_f] : entries_)
    if (theta >= theta_f && phi >= phi_f) return false;
  return true;
}

void Filter::add(double theta, double phi) {
  insert((1.0 - kGammaTheta) * theta, phi - kGammaPhi * theta);
}

void Filter::insert(double theta, double phi) {
  // An entry whose rejection region is contained in an existing one is
  // redundant; conversely existing entries covered by the new one are dropped.
  for (const auto& [theta_f, phi_f] : entries_)
    if (theta_f <= theta && phi_f <= phi) return;
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [&](const std::pair<double, double>& e) {
                                  return theta <= e.first && phi <= e.second;
                                }),
                 entries_.end());
  entries_.emplace_back(theta, phi);
}

namespace {

constexpr double kThetaMaxFactor = 1e4;   // violation cap over the start point
constexpr double kThetaMinFactor = 1e-4;  // f-type region threshold
constexpr double kKappaEpsilon = 10.0;    // barrier phase ends at E_mu <= 10 mu
constexpr double kTauMin = 0.99;          // fraction-to-boundary floor
constexpr double kEtaPhi = 1e-4;          // Armijo slope fraction
constexpr double kGammaAlpha = 0.05;      // backtracking safety factor
constexpr double kSTheta = 1.1;           // switching condition exponents
constexpr double kSPhi = 2.3;
constexpr double kKappaSigma = 1e10;  // multiplier clamp around mu/gap
constexpr double kKappaPush = 1e-2;   // start-point push-off fractions
constexpr int kMaxRegularizations = 20;
constexpr double kDeltaWFloor = 1e-4;  // delta_w seed vs max(1, ||W||_inf)
constexpr double kDeltaCScale = 1e-8;  // delta_c = 1e-8 mu^0.25 on singularity
constexpr int kMaxBacktracks = 60;    // hard cap on halvings per line search

using Clock = std::chrono::steady_clock;

// Accumulates wall time into a SolveReport field for the enclosing scope.
struct StopWatch {
  double& acc;
  Clock::time_point t0{Clock::now()};
  explicit StopWatch(double& a) : acc(a) {}
  ~StopWatch() {
    acc += std::chrono::duration<double>(Clock::now() - t0).count();
  }
};

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() > 0 ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

double one_norm(const Eigen::VectorXd& v) {
  return v.size() > 0 ? v.lpNorm<1>() : 0.0;
}

/// Elastic reformulation used by the restoration phase:
///   min  sum(p + n)  s.t.  c(x) - p + n = 0,  p, n >= 0,  l <= x <= u.
/// Always feasible; its optimum minimizes ||c(x)||_1 over the box. Slack
/// pairs join the graph node owning their constraint so the partition layout
/// of the base problem carries over.
class RestorationNlp : public Nlp {
 public:
  RestorationNlp(Nlp& base, const Eigen::VectorXd& x_now)
      : base_(base), nb_(base.num_vars()), mb_(base.num_cons()) {
    const int n = nb_ + 2 * mb_;
    lb_.setConstant(n, -kInfinity);
    ub_.setConstant(n, kInfinity);
    lb_.head(nb_) = base.lower();
    ub_.head(nb_) = base.upper();
    lb_.tail(2 * mb_).setZero();

    // p - n = c(x_now) makes the start exactly feasible; the shared +0.1
    // shift keeps both slacks strictly interior without changing p - n.
    start_.resize(n);
    start_.head(nb_) = x_now;
    Eigen::VectorXd c(mb_);
    base.constraints(x_now, c);
    for (int i = 0; i < mb_; ++i) {
      start_[nb_ + i] = std::max(c[i], 0.0) + 0.1;
      start_[nb_ + mb_ + i] = std::max(-c[i], 0.0) + 0.1;
    }

    jac_ = base.jacobian_pattern();
    for (int i = 0; i < mb_; ++i) {
      jac_.rows.push_back(i);
      jac_.cols.push_back(nb_ + i);
      jac_.rows.push_back(i);
      jac_.cols.push_back(nb_ + mb_ + i);
    }

    // Base dual index nb+i expands to {p_i, n_i, shifted dual row n+i}.
    sets_ = base.index_sets();
    for (auto& set : sets_) {
      std::vector<int> out;
      out.reserve(set.size() * 3);
      for (int idx : set) {
        if (idx < nb_) {
          out.push_back(idx);
        } else {
          const int i = idx - nb_;
          out.push_back(nb_ + i);
          out.push_back(nb_ + mb_ + i);
          out.push_back(n + i);
        }
      }
      std::sort(out.begin(), out.end());
      set = std::move(out);
    }
  }

  int num_vars() const override { return nb_ + 2 * mb_; }
  int num_cons() const override { return mb_; }
  const Eigen::VectorXd& lower() const override { return lb_; }
  const Eigen::VectorXd& upper() const override { return ub_; }
  const Eigen::VectorXd& start() const override { return start_; }

  double objective(const Eigen::VectorXd& x) const override {
    return x.tail(2 * mb_).sum();
  }
  void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const override {
    (void)x;
    grad.setZero(num_vars());
    grad.tail(2 * mb_).setOnes();
  }
  void constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c) const override {
    base_.constraints(x.head(nb_), c);
    c -= x.segment(nb_, mb_);
    c += x.tail(mb_);
  }

  const SparsityPattern& jacobian_pattern() const override { return jac_; }
  void jacobian(const Eigen::VectorXd& x,
                Eigen::VectorXd& values) const override {
    const int base_nnz = base_.jacobian_pattern().nnz();
    values.resize(jac_.nnz());
    Eigen::VectorXd base_vals(base_nnz);
    base_.jacobian(x.head(nb_), base_vals);
    values.head(base_nnz) = base_vals;
    for (int i = 0; i < mb_; ++i) {
      values[base_nnz + 2 * i] = -1.0;
      values[base_nnz + 2 * i + 1] = 1.0;
    }
  }

  // The elastic objective is linear, so the Lagrangian Hessian is the base
  // constraint curvature alone regardless of obj_scale.
  const SparsityPattern& hessian_pattern() const override {
    return base_.hessian_pattern();
  }
  void hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
               double obj_scale, Eigen::VectorXd& values) const override {
    (void)obj_scale;
    base_.hessian(x.head(nb_), lambda, 0.0, values);
  }

  int num_graph_nodes() const override { return base_.num_graph_nodes(); }
  const std::vector<std::vector<int>>& adjacency() const override {
    return base_.adjacency();
  }
  const std::vector<std::vector<int>>& index_sets() const override {
    return sets_;
  }
  void set_threads(int threads) override { base_.set_threads(threads); }

 private:
  Nlp& base_;
  int nb_, mb_;
  Eigen::VectorXd lb_, ub_, start_;
  SparsityPattern jac_;
  std::vector<std::vector<int>> sets_;
};

class Driver {
 public:
  Driver(Nlp& nlp, const IpmOptions& opt)
      : nlp_(nlp),
        opt_(opt),
        n_(nlp.num_vars()),
        m_(nlp.num_cons()),
        lb_(nlp.lower()),
        ub_(nlp.upper()) {
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lb_[j])) ++num_bounds_;
      if (std::isfinite(ub_[j])) ++num_bounds_;
    }
  }

  std::pair<PrimalDualPoint, SolveReport> run();

 private:
  void push_interior(Eigen::VectorXd& x) const;
  void reset_bound_duals(PrimalDualPoint& pt) const;
  void clamp_duals(PrimalDualPoint& pt) const;
  void evaluate_point(const Eigen::VectorXd& x);
  double barrier(const Eigen::VectorXd& x, double f) const;
  double barrier_slope(const Eigen::VectorXd& x,
                       const Eigen::VectorXd& dx) const;
  double kkt_error(const PrimalDualPoint& pt, double mu, double* pr_out,
                   double* du_out) const;
  void compute_step(const PrimalDualPoint& pt, KktSystem& K, KktSolver& solver,
                    Eigen::VectorXd& d, int& lin_iters);
  bool line_search(PrimalDualPoint& pt, const Eigen::VectorXd& dx,
                   double alpha_max);
  bool restoration(PrimalDualPoint& pt);
  void log_header() const;
  void log_row(int iter, double obj, double pr, double du, double alpha_pr,
               double alpha_du, int lin_iters, double delta_w) const;

  Nlp& nlp_;
  const IpmOptions& opt_;
  const int n_;
  const int m_;
  const Eigen::VectorXd& lb_;
  const Eigen::VectorXd& ub_;
  int num_bounds_{0};

  IpmState state_;
  SolveReport rep_;
  double theta_max_{0.0};
  double theta_min_{0.0};

  // Oracle values at the current iterate, refreshed once per iteration.
  double f_{0.0};
  Eigen::VectorXd grad_, cons_, jac_vals_, dzl_, dzu_;
};

void Driver::push_interior(Eigen::VectorXd& x) const {
  for (int j = 0; j < n_; ++j) {
    const double l = lb_[j];
    const double u = ub_[j];
    if (std::isfinite(l) && std::isfinite(u)) {
      const double pl =
          std::min(kKappaPush * std::max(1.0, std::abs(l)), kKappaPush * (u - l));
      const double pu =
          std::min(kKappaPush * std::max(1.0, std::abs(u)), kKappaPush * (u - l));
      x[j] = std::clamp(x[j], l + pl, u - pu);
    } else if (std::isfinite(l)) {
      x[j] = std::max(x[j], l + kKappaPush * std::max(1.0, std::abs(l)));
    } else if (std::isfinite(u)) {
      x[j] = std::min(x[j], u - kKappaPush * std::max(1.0, std::abs(u)));
    }
  }
}

void Driver::reset_bound_duals(PrimalDualPoint& pt) const {
  pt.zl.setZero(n_);
  pt.zu.setZero(n_);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb_[j])) pt.zl[j] = state_.mu / (pt.x[j] - lb_[j]);
    if (std::isfinite(ub_[j])) pt.zu[j] = state_.mu / (ub_[j] - pt.x[j]);
  }
}

void Driver::clamp_duals(PrimalDualPoint& pt) const {
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb_[j])) {
      const double gap = pt.x[j] - lb_[j];
      pt.zl[j] = std::clamp(pt.zl[j], state_.mu / (kKappaSigma * gap),
                            kKappaSigma * state_.mu / gap);
    }
    if (std::isfinite(ub_[j])) {
      const double gap = ub_[j] - pt.x[j];
      pt.zu[j] = std::clamp(pt.zu[j], state_.mu / (kKappaSigma * gap),
                            kKappaSigma * state_.mu / gap);
    }
  }
}

void Driver::evaluate_point(const Eigen::VectorXd& x) {
  StopWatch watch(rep_.time_function_eval);
  f_ = nlp_.objective(x);
  nlp_.gradient(x, grad_);
  nlp_.constraints(x, cons_);
  jac_vals_.resize(nlp_.jacobian_pattern().nnz());
  nlp_.jacobian(x, jac_vals_);
}

double Driver::barrier(const Eigen::VectorXd& x, double f) const {
  double phi = f;
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb_[j])) phi -= state_.mu * std::log(x[j] - lb_[j]);
    if (std::isfinite(ub_[j])) phi -= state_.mu * std::log(ub_[j] - x[j]);
  }
  return phi;
}

double Driver::barrier_slope(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& dx) const {
  double slope = grad_.dot(dx);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb_[j])) slope -= state_.mu / (x[j] - lb_[j]) * dx[j];
    if (std::isfinite(ub_[j])) slope += state_.mu / (ub_[j] - x[j]) * dx[j];
  }
  return slope;
}

double Driver::kkt_error(const PrimalDualPoint& pt, double mu, double* pr_out,
                         double* du_out) const {
  Eigen::VectorXd r = grad_ - pt.zl + pt.zu;
  const SparsityPattern& jp = nlp_.jacobian_pattern();
  for (int k = 0; k < jp.nnz(); ++k)
    r[jp.cols[k]] += jac_vals_[k] * pt.lambda[jp.rows[k]];
  const double du = inf_norm(r);
  const double pr = inf_norm(cons_);

  double comp = 0.0;
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lb_[j]))
      comp = std::max(comp, std::abs((pt.x[j] - lb_[j]) * pt.zl[j] - mu));
    if (std::isfinite(ub_[j]))
      comp = std::max(comp, std::abs((ub_[j] - pt.x[j]) * pt.zu[j] - mu));
  }

  // Standard s_max = 100 scaling guards against diverging multipliers.
  const double mult_sum = one_norm(pt.zl) + one_norm(pt.zu);
  const double s_d =
      std::max(100.0, (one_norm(pt.lambda) + mult_sum) /
                          std::max(1, m_ + num_bounds_)) /
      100.0;
  const double s_c =
      num_bounds_ > 0 ? std::max(100.0, mult_sum / num_bounds_) / 100.0 : 1.0;

  if (pr_out) *pr_out = pr;
  if (du_out) *du_out = du;
  return std::max({du / s_d, pr, comp / s_c});
}

void Driver::compute_step(const PrimalDualPoint& pt, KktSystem& K,
                          KktSolver& solver, Eigen::VectorXd& d,
                          int& lin_iters) {
  {
    StopWatch watch(rep_.time_function_eval);
    K.assemble(pt, state_.mu, 0.0, 0.0);
  }
  const double dw0 = kDeltaWFloor * std::max(1.0, K.w_inf_norm());
  const double lin_tol = std::clamp(0.1 * state_.mu, 1e-12, 1e-8);
  state_.delta_w = 0.0;
  state_.delta_c = 0.0;

  for (int attempt = 0;; ++attempt) {
    bool solved = false;
    IterStats stats;
    try {
      StopWatch watch(rep_.time_linear_solve);
      solver.prepare(K);
      stats = solver.solve(K, K.rhs(), d, lin_tol);
      solved = stats.converged;
    } catch (const SingularMatrix&) {
      // factorization failure, handled like an unconverged solve below
    }

    if (solved) {
      rep_.linear_iterations += stats.iterations;
      lin_iters = stats.iterations;
      // Inertia-free acceptance: positive curvature along the primal step.
      Eigen::VectorXd probe = Eigen::VectorXd::Zero(n_ + m_);
      probe.head(n_) = d.head(n_);
      const double quad = d.head(n_).dot(K.matvec(probe).head(n_));
      if (curvature_test(quad, d.head(n_).squaredNorm())) return;
    }

    if (attempt >= kMaxRegularizations)
      throw RegularizationExhausted(
          "regularization exhausted: no acceptable step after 20 delta "
          "escalations");
    // Singularity (or an unconverged solve) implicates the constraint block;
    // an indefinite but solvable system only needs more primal damping.
    if (!solved) state_.delta_c = kDeltaCScale * std::pow(state_.mu, 0.25);
    state_.delta_w = std::max(dw0, 10.0 * state_.delta_w);
    ++rep_.regularization_escalations;
    K.set_deltas(state_.delta_w, state_.delta_c);
  }
}

bool Driver::line_search(PrimalDualPoint& pt, const Eigen::VectorXd& dx,
                         double alpha_max) {
  const double theta_k = one_norm(cons_);
  const double phi_k = barrier(pt.x, f_);
  const double slope = barrier_slope(pt.x, dx);

  double alpha_min = kGammaAlpha * Filter::kGammaTheta;
  if (slope < 0.0) {
    double bound = std::min(Filter::kGammaTheta,
                            Filter::kGammaPhi * theta_k / (-slope));
    if (theta_k <= theta_min_)
      bound = std::min(bound, std::pow(theta_k, kSTheta) /
                                  std::pow(-slope, kSPhi));
    alpha_min = kGammaAlpha * bound;
  }

  double alpha = alpha_max;
  Eigen::VectorXd x_trial(n_);
  Eigen::VectorXd c_trial(m_);
  for (int backtrack = 0; alpha >= alpha_min && backtrack < kMaxBacktracks;
       ++backtrack, alpha *= 0.5) {
    x_trial = pt.x + alpha * dx;
    double f_trial;
    try {
      StopWatch watch(rep_.time_function_eval);
      f_trial = nlp_.objective(x_trial);
      nlp_.constraints(x_trial, c_trial);
    } catch (const DomainError&) {
      continue;  // evaluation failure rejects the trial point
    } catch (const TrialPointFailure&) {
      continue;
    }
    if (!std::isfinite(f_trial) || !c_trial.allFinite()) continue;

    const double theta_t = one_norm(c_trial);
    const double phi_t = barrier(x_trial, f_trial);
    if (!state_.filter.acceptable(theta_t, phi_t)) continue;

    const bool switching =
        slope < 0.0 && alpha * std::pow(-slope, kSPhi) >
                           std::pow(theta_k, kSTheta);
    bool accepted = false;
    bool f_type = false;
    if (theta_k <= theta_min_ && switching) {
      // f-type region: Armijo decrease of the barrier objective.
      f_type = phi_t <= phi_k + kEtaPhi * alpha * slope;
      accepted = f_type;
    } else {
      accepted = theta_t <= (1.0 - Filter::kGammaTheta) * theta_k ||
                 phi_t <= phi_k - Filter::kGammaPhi * theta_k;
    }
    if (!accepted) continue;

    if (!f_type) state_.filter.add(theta_k, phi_k);
    pt.x = x_trial;
    state_.alpha_primal = alpha;
    return true;
  }
  return false;
}

bool Driver::restoration(PrimalDualPoint& pt) {
  RestorationNlp elastic(nlp_, pt.x);
  IpmOptions sub_opt;
  sub_opt.tol = opt_.tol;
  sub_opt.max_iter = 100;
  sub_opt.mu_init = opt_.mu_init;
  sub_opt.threads = opt_.threads;
  sub_opt.linear = LinearSolverOptions{};
  sub_opt.linear.threads = opt_.linear.threads;
  sub_opt.log = nullptr;
  sub_opt.enable_restoration = false;

  std::pair<PrimalDualPoint, SolveReport> sub;
  try {
    sub = solve(elastic, sub_opt);
  } catch (const Error&) {
    return false;
  }
  rep_.time_function_eval += sub.second.time_function_eval;
  rep_.time_linear_solve += sub.second.time_linear_solve;
  rep_.linear_iterations += sub.second.linear_iterations;
  rep_.regularization_escalations += sub.second.regularization_escalations;
  if (sub.second.status != SolveReport::Status::kOptimal &&
      sub.second.status != SolveReport::Status::kMaxIter)
    return false;

  Eigen::VectorXd x_new = sub.first.x.head(n_);
  Eigen::VectorXd c_new(m_);
  double f_new;
  try {
    StopWatch watch(rep_.time_function_eval);
    f_new = nlp_.objective(x_new);
    nlp_.constraints(x_new, c_new);
  } catch (const DomainError&) {
    return false;
  } catch (const TrialPointFailure&) {
    return false;
  }
  const double theta_new = one_norm(c_new);
  const double theta_old = one_norm(cons_);
  // The restored point must be filter-acceptable and beat the failed iterate
  // by a clear margin, otherwise the violation has stagnated.
  if (!state_.filter.acceptable(theta_new, barrier(x_new, f_new)) ||
      theta_new > 0.9 * theta_old)
    return false;

  pt.x = std::move(x_new);
  pt.lambda.setZero(m_);
  reset_bound_duals(pt);
  return true;
}

void Driver::log_header() const {
  if (opt_.log)
    *opt_.log
        << "iter objective pr_inf du_inf mu alpha_pr alpha_du lin_it delta_w\n";
}

void Driver::log_row(int iter, double obj, double pr, double du,
                     double alpha_pr, double alpha_du, int lin_iters,
                     double delta_w) const {
  if (!opt_.log) return;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "%4d % .8e %9.3e %9.3e %9.3e %9.3e %9.3e %6d %9.3e", iter, obj,
                pr, du, state_.mu, alpha_pr, alpha_du, lin_iters, delta_w);
  *opt_.log << buf << '\n';
}

std::pair<PrimalDualPoint, SolveReport> Driver::run() {
  const auto t_start = Clock::now();
  nlp_.set_threads(std::max(1, opt_.threads));

  PrimalDualPoint& pt = state_.point;
  state_.mu = opt_.mu_init;
  pt.x = nlp_.start();
  push_interior(pt.x);
  pt.lambda.setZero(m_);
  reset_bound_duals(pt);

  auto finish = [&](SolveReport::Status status,
                    double e0) -> std::pair<PrimalDualPoint, SolveReport> {
    rep_.status = status;
    rep_.iterations = state_.iteration;
    rep_.kkt_error = e0;
    rep_.objective = f_;
    rep_.primal_infeasibility = inf_norm(cons_);
    rep_.time_total =
        std::chrono::duration<double>(Clock::now() - t_start).count();
    rep_.time_other = std::max(
        0.0, rep_.time_total - rep_.time_function_eval - rep_.time_linear_solve);
    return {pt, rep_};
  };

  try {
    evaluate_point(pt.x);
  } catch (const TrialPointFailure&) {
    f_ = std::numeric_limits<double>::quiet_NaN();
    cons_.setZero(0);
    return finish(SolveReport::Status::kTrialPointFailure,
                  std::numeric_limits<double>::infinity());
  } catch (const DomainError&) {
    f_ = std::numeric_limits<double>::quiet_NaN();
    cons_.setZero(0);
    return finish(SolveReport::Status::kTrialPointFailure,
                  std::numeric_limits<double>::infinity());
  }

  const double theta0 = one_norm(cons_);
  theta_max_ = kThetaMaxFactor * std::max(1.0, theta0);
  theta_min_ = kThetaMinFactor * std::max(1.0, theta0);
  state_.filter.reset(theta_max_);

  KktSystem K(nlp_);
  KktSolver solver(nlp_, opt_.linear);
  Eigen::VectorXd d(n_ + m_);
  dzl_.resize(n_);
  dzu_.resize(n_);

  double pr = 0.0;
  double du = 0.0;
  double e0 = kkt_error(pt, 0.0, &pr, &du);
  log_header();
  log_row(0, f_, pr, du, 0.0, 0.0, 0, 0.0);

  SolveReport::Status status = SolveReport::Status::kMaxIter;
  while (true) {
    if (e0 <= opt_.tol) {
      status = SolveReport::Status::kOptimal;
      break;
    }
    if (state_.iteration >= opt_.max_iter) {
      status = SolveReport::Status::kMaxIter;
      break;
    }

    // Barrier update: hop to the next subproblem while the current one is
    // solved to within its own tolerance 10 mu.
    while (state_.mu > opt_.tol / 10.0 &&
           kkt_error(pt, state_.mu, nullptr, nullptr) <=
               kKappaEpsilon * state_.mu) {
      state_.mu = update_barrier(state_.mu, opt_.tol);
      state_.filter.reset(theta_max_);
    }
    const double tau = std::max(kTauMin, 1.0 - state_.mu);

    int lin_iters = 0;
    compute_step(pt, K, solver, d, lin_iters);
    const Eigen::VectorXd dx = d.head(n_);
    const Eigen::VectorXd dlam = d.tail(m_);
    K.recover_bound_step(pt, dx, state_.mu, dzl_, dzu_);
    const auto [alpha_max, alpha_du] =
        fraction_to_boundary(lb_, ub_, pt, dx, dzl_, dzu_, tau);

    const double theta_k = one_norm(cons_);
    const double phi_k = barrier(pt.x, f_);
    if (line_search(pt, dx, alpha_max)) {
      pt.lambda += state_.alpha_primal * dlam;
      pt.zl += alpha_du * dzl_;
      pt.zu += alpha_du * dzu_;
      clamp_duals(pt);
      state_.alpha_dual = alpha_du;
    } else {
      // Line search exhausted. At a (near) feasible iterate restoration
      // cannot help; otherwise enter the elastic restoration phase.
      if (!opt_.enable_restoration || theta_k < 1e-12) {
        status = SolveReport::Status::kTrialPointFailure;
        break;
      }
      state_.filter.add(theta_k, phi_k);
      ++rep_.restorations;
      if (!restoration(pt)) {
        status = SolveReport::Status::kRestorationFailure;
        break;
      }
      state_.alpha_primal = 0.0;
      state_.alpha_dual = 0.0;
      lin_iters = 0;
    }

    ++state_.iteration;
    try {
      evaluate_point(pt.x);
    } catch (const DomainError&) {
      status = SolveReport::Status::kTrialPointFailure;
      break;
    } catch (const TrialPointFailure&) {
      status = SolveReport::Status::kTrialPointFailure;
      break;
    }
    e0 = kkt_error(pt, 0.0, &pr, &du);
    log_row(state_.iteration, f_, pr, du, state_.alpha_primal,
            state_.alpha_dual, lin_iters, state_.delta_w);
  }

  rep_.overlap_adaptations += solver.total_adaptations();
  return finish(status, e0);
}

}  // namespace

std::pair<PrimalDualPoint, SolveReport> solve(Nlp& nlp,
                                              const IpmOptions& options) {
  Driver driver(nlp, options);
  return driver.run();
}

}  // namespace gnlp
