#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "graphnlp/linalg.hpp"

namespace gnlp {

struct IpmOptions {
  double tol{1e-8};    // scaled KKT error target
  int max_iter{3000};  // outer iterations
  double mu_init{0.1};
  int threads{1};
  LinearSolverOptions linear;
  std::ostream* log{nullptr};  // iteration log sink, one line per iteration
  bool enable_restoration{true};
};

struct SolveReport {
  enum class Status {
    kOptimal,
    kMaxIter,
    kRestorationFailure,
    kTrialPointFailure,
  };
  Status status{Status::kMaxIter};
  int iterations{0};
  double kkt_error{0.0};  // scaled E_0 at the returned point
  double objective{0.0};
  double primal_infeasibility{0.0};
  double time_function_eval{0.0};  // seconds, oracle evaluations
  double time_linear_solve{0.0};   // seconds, factor + solve
  double time_other{0.0};          // seconds, everything else
  double time_total{0.0};
  int linear_iterations{0};  // summed over all solves
  int overlap_adaptations{0};
  int regularization_escalations{0};
  int restorations{0};
};

const char* status_name(SolveReport::Status status);

/// mu+ = max(tol/10, min(0.2 mu, mu^1.5)): superlinear decrease floored a
/// decade under the termination tolerance.
double update_barrier(double mu, double tol);

/// Inertia-free acceptance of a computed step: the regularized reduced
/// Hessian must be positive along it, d'(W+Sigma+delta_w I)d >= 1e-12 d'd.
/// The zero step passes vacuously.
bool curvature_test(double quadratic_form, double step_squared_norm);

/// Largest alpha in (0,1] keeping every bounded component of x + alpha dx at
/// least the fraction (1-tau) of its current distance to the bound, and the
/// same for the bound multipliers; returns (alpha_primal, alpha_dual).
std::pair<double, double> fraction_to_boundary(const Eigen::VectorXd& lb,
                                               const Eigen::VectorXd& ub,
                                               const PrimalDualPoint& point,
                                               const Eigen::VectorXd& dx,
                                               const Eigen::VectorXd& dzl,
                                               const Eigen::VectorXd& dzu,
                                               double tau);

/// Line-search filter over (constraint violation, barrier objective) pairs.
/// Entries are stored pre-shrunk by the acceptance margins, so a trial point
/// is acceptable iff it strictly improves one coordinate of every entry. No
/// stored entry ever dominates another.
class Filter {
 public:
  static constexpr double kGammaTheta = 1e-5;
  static constexpr double kGammaPhi = 1e-5;

  /// Clears to the single cap entry (theta_max, -inf).
  void reset(double theta_max);
  bool acceptable(double theta, double phi) const;
  /// Augments with the margin-shrunk image of the current iterate.
  void add(double theta, double phi);
  const std::vector<std::pair<double, double>>& entries() const {
    return entries_;
  }

 private:
  void insert(double theta, double phi);
  std::vector<std::pair<double, double>> entries_;
};

/// Mutable state of one interior-point run. The solver keeps every accepted
/// iterate strictly interior and the filter free of dominated entries.
struct IpmState {
  PrimalDualPoint point;
  double mu{0.1};
  double delta_w{0.0};
  double delta_c{0.0};
  Filter filter;
  int iteration{0};
  double alpha_primal{0.0};
  double alpha_dual{0.0};
};

/// Filter line-search interior-point loop: a decreasing barrier sequence,
/// regularized Newton steps through KktSolver, inertia-free curvature
/// safeguard, fraction-to-boundary and filter acceptance, with an elastic
/// minimum-violation restoration phase. Throws RegularizationExhausted when
/// 20 delta escalations cannot produce an acceptable step; every other
/// failure is reported through the returned status.
std::pair<PrimalDualPoint, SolveReport> solve(Nlp& nlp,
                                              const IpmOptions& options);

}  // namespace gnlp
