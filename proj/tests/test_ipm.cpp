#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "graphnlp/ipm.hpp"
#include "graphnlp/nlp.hpp"

using namespace gnlp;

namespace {

using Status = SolveReport::Status;

// Dual residual grad f + A' lambda - zl + zu recomputed from the raw oracles,
// independent of anything the solver reports.
Eigen::VectorXd stationarity(const Nlp& nlp, const PrimalDualPoint& pt) {
  Eigen::VectorXd grad(nlp.num_vars());
  nlp.gradient(pt.x, grad);
  Eigen::VectorXd jac(nlp.jacobian_pattern().nnz());
  nlp.jacobian(pt.x, jac);
  Eigen::VectorXd r = grad - pt.zl + pt.zu;
  const SparsityPattern& jp = nlp.jacobian_pattern();
  for (int k = 0; k < jp.nnz(); ++k)
    r[jp.cols[k]] += jac[k] * pt.lambda[jp.rows[k]];
  return r;
}

double max_complementarity(const Nlp& nlp, const PrimalDualPoint& pt) {
  double comp = 0.0;
  for (int j = 0; j < nlp.num_vars(); ++j) {
    if (std::isfinite(nlp.lower()[j]))
      comp = std::max(comp, (pt.x[j] - nlp.lower()[j]) * pt.zl[j]);
    if (std::isfinite(nlp.upper()[j]))
      comp = std::max(comp, (nlp.upper()[j] - pt.x[j]) * pt.zu[j]);
  }
  return comp;
}

// Six equality-coupled quadratics on a path graph; small enough for quick
// solves yet partitionable into several subdomains.
OptiGraph chain_model() {
  OptiGraph g;
  std::vector<NodeId> nodes;
  std::vector<Expr> vars;
  for (int i = 0; i < 6; ++i) {
    NodeId v = g.add_node();
    nodes.push_back(v);
    vars.push_back(g.add_variable(v, 0.0, 10.0, 2.0, "x" + std::to_string(i)));
    g.add_objective_term(v, square(vars[i] - 0.3 * i) + 0.1 * vars[i]);
  }
  for (int i = 0; i + 1 < 6; ++i) {
    g.add_edge(nodes[i], nodes[i + 1]);
    g.add_link_constraint(nodes[i], vars[i + 1] - vars[i], 0.1,
                          "step" + std::to_string(i));
  }
  return g;
}

}  // namespace

TEST_CASE("barrier update schedule") {
  CHECK(update_barrier(0.1, 1e-8) == doctest::Approx(0.02).epsilon(1e-15));
  // superlinear branch: mu^1.5 smaller than 0.2 mu
  CHECK(update_barrier(0.01, 1e-8) ==
        doctest::Approx(0.001).epsilon(1e-12));
  // floor at tol/10
  CHECK(update_barrier(1e-9, 1e-8) == doctest::Approx(1e-9).epsilon(1e-15));
  CHECK(update_barrier(1e-12, 1e-8) == doctest::Approx(1e-9).epsilon(1e-15));
  for (double mu : {1.0, 0.3, 0.05, 1e-3, 1e-6}) {
    CHECK(update_barrier(mu, 1e-8) < mu);
    CHECK(update_barrier(mu, 1e-8) > 0.0);
  }
}

TEST_CASE("curvature test") {
  // W + Sigma = I along a unit step
  CHECK(curvature_test(1.0, 1.0));
  // W + Sigma = -I
  CHECK_FALSE(curvature_test(-1.0, 1.0));
  // zero step is vacuously acceptable
  CHECK(curvature_test(0.0, 0.0));
  CHECK(curvature_test(1e-12, 1.0));
  CHECK_FALSE(curvature_test(0.9e-12, 1.0));
}

TEST_CASE("fraction to boundary") {
  auto point_of = [](double x, double zl, double zu) {
    PrimalDualPoint pt;
    pt.x = Eigen::VectorXd::Constant(1, x);
    pt.lambda.resize(0);
    pt.zl = Eigen::VectorXd::Constant(1, zl);
    pt.zu = Eigen::VectorXd::Constant(1, zu);
    return pt;
  };
  Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);

  SUBCASE("lower bound blocks the primal step") {
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(1, kInfinity);
    Eigen::VectorXd dx = Eigen::VectorXd::Constant(1, -2.0);
    auto [apr, adu] = fraction_to_boundary(lb, ub, point_of(1.0, 0.1, 0.0), dx,
                                           zero1, zero1, 0.995);
    CHECK(apr == doctest::Approx(0.4975).epsilon(1e-15));
    CHECK(adu == doctest::Approx(1.0));
  }
  SUBCASE("moving away from the only bound is unrestricted") {
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(1, kInfinity);
    Eigen::VectorXd dx = Eigen::VectorXd::Constant(1, 5.0);
    auto [apr, adu] = fraction_to_boundary(lb, ub, point_of(1.0, 0.1, 0.0), dx,
                                           zero1, zero1, 0.995);
    CHECK(apr == doctest::Approx(1.0));
    CHECK(adu == doctest::Approx(1.0));
  }
  SUBCASE("upper bound side") {
    Eigen::VectorXd lb = Eigen::VectorXd::Constant(1, -kInfinity);
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(1, 2.0);
    Eigen::VectorXd dx = Eigen::VectorXd::Constant(1, 4.0);
    auto [apr, adu] = fraction_to_boundary(lb, ub, point_of(1.0, 0.0, 0.1), dx,
                                           zero1, zero1, 0.5);
    CHECK(apr == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(adu == doctest::Approx(1.0));
  }
  SUBCASE("dual step limited by its own positivity") {
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(1, kInfinity);
    Eigen::VectorXd dzl = Eigen::VectorXd::Constant(1, -4.0);
    auto [apr, adu] = fraction_to_boundary(lb, ub, point_of(1.0, 1.0, 0.0),
                                           zero1, dzl, zero1, 0.9);
    CHECK(apr == doctest::Approx(1.0));
    CHECK(adu == doctest::Approx(0.225).epsilon(1e-15));
  }
  SUBCASE("minimum over components wins") {
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(2, kInfinity);
    PrimalDualPoint pt;
    pt.x = Eigen::VectorXd::Ones(2);
    pt.lambda.resize(0);
    pt.zl = Eigen::VectorXd::Ones(2);
    pt.zu = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd dx(2), zero2 = Eigen::VectorXd::Zero(2);
    dx << -2.0, -0.5;
    auto [apr, adu] =
        fraction_to_boundary(lb, ub, pt, dx, zero2, zero2, 0.995);
    CHECK(apr == doctest::Approx(0.4975).epsilon(1e-15));
    CHECK(adu == doctest::Approx(1.0));
  }
}

TEST_CASE("filter acceptance and augmentation") {
  Filter f;
  SUBCASE("empty filter accepts anything") {
    CHECK(f.acceptable(1e9, 1e9));
    CHECK(f.entries().empty());
  }
  SUBCASE("reset installs the violation cap") {
    f.reset(100.0);
    REQUIRE(f.entries().size() == 1);
    CHECK(f.acceptable(99.0, 1e300));
    CHECK_FALSE(f.acceptable(100.0, -1e300));
    CHECK_FALSE(f.acceptable(101.0, -1e300));
  }
  SUBCASE("margin-shrunk domination") {
    f.add(1.0, 10.0);
    CHECK_FALSE(f.acceptable(2.0, 20.0));  // dominated
    CHECK(f.acceptable(0.5, 9.0));         // better violation
    CHECK(f.acceptable(2.0, 9.0));         // better objective
  }
  SUBCASE("entries never dominate one another") {
    f.reset(1e4);
    f.add(1.0, 10.0);
    f.add(2.0, 5.0);
    f.add(0.5, 20.0);
    f.add(1.5, 7.0);
    CHECK(f.entries().size() == 5);
    f.add(3.0, 30.0);  // covered by (1,10): no new entry
    CHECK(f.entries().size() == 5);
    f.add(0.1, 1.0);  // dominates all four finite entries
    CHECK(f.entries().size() == 2);
    const auto& es = f.entries();
    for (size_t i = 0; i < es.size(); ++i)
      for (size_t j = 0; j < es.size(); ++j)
        if (i != j)
          CHECK_FALSE((es[i].first <= es[j].first &&
                       es[i].second <= es[j].second));
  }
}

TEST_CASE("unconstrained interior optimum") {
  OptiGraph g;
  NodeId v = g.add_node();
  Expr x = g.add_variable(v, 0.0, kInfinity, 1.0, "x");
  g.add_objective_term(v, square(x - 2.0));
  StandardNlp nlp = g.flatten();

  IpmOptions opt;
  auto [pt, rep] = solve(nlp, opt);
  CHECK(rep.status == Status::kOptimal);
  CHECK(pt.x[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(rep.objective) < 1e-10);
  CHECK(rep.kkt_error <= 1e-8);
  CHECK(pt.zl[0] < 1e-6);  // inactive bound multiplier vanishes
  CHECK(rep.iterations < 50);
  CHECK(rep.restorations == 0);
}

TEST_CASE("analytic equality-constrained solution") {
  // min x1 + x2  s.t.  x1 x2 = 1, x >= 0: optimum (1,1) with lambda = -1.
  OptiGraph g;
  NodeId v = g.add_node();
  Expr x1 = g.add_variable(v, 0.0, kInfinity, 0.5, "x1");
  Expr x2 = g.add_variable(v, 0.0, kInfinity, 2.0, "x2");
  g.add_constraint(v, x1 * x2, Sense::kEq, 1.0);
  g.add_objective_term(v, x1 + x2);
  StandardNlp nlp = g.flatten();

  IpmOptions opt;
  auto [pt, rep] = solve(nlp, opt);
  CHECK(rep.status == Status::kOptimal);
  CHECK(pt.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pt.x[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pt.lambda[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(rep.objective == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("four-variable nonlinear benchmark reaches a verified KKT point") {
  // Problem 71 of the Hock-Schittkowski collection; the optimum is known to
  // high accuracy from the literature.
  OptiGraph g;
  NodeId v = g.add_node();
  Expr x1 = g.add_variable(v, 1.0, 5.0, 1.0, "x1");
  Expr x2 = g.add_variable(v, 1.0, 5.0, 5.0, "x2");
  Expr x3 = g.add_variable(v, 1.0, 5.0, 5.0, "x3");
  Expr x4 = g.add_variable(v, 1.0, 5.0, 1.0, "x4");
  g.add_constraint(v, x1 * x2 * x3 * x4, Sense::kGe, 25.0);
  g.add_constraint(v, square(x1) + square(x2) + square(x3) + square(x4),
                   Sense::kEq, 40.0);
  g.add_objective_term(v, x1 * x4 * (x1 + x2 + x3) + x3);
  StandardNlp nlp = g.flatten();
  REQUIRE(nlp.num_vars() == 5);  // one slack for the inequality
  REQUIRE(nlp.num_cons() == 2);

  IpmOptions opt;
  auto [pt, rep] = solve(nlp, opt);
  REQUIRE(rep.status == Status::kOptimal);

  CHECK(pt.x[0] == doctest::Approx(1.00000000).epsilon(1e-5));
  CHECK(pt.x[1] == doctest::Approx(4.74299963).epsilon(1e-5));
  CHECK(pt.x[2] == doctest::Approx(3.82114998).epsilon(1e-5));
  CHECK(pt.x[3] == doctest::Approx(1.37940829).epsilon(1e-5));
  CHECK(rep.objective == doctest::Approx(17.0140173).epsilon(1e-6));

  // Independent KKT verification from the raw oracles.
  Eigen::VectorXd r = stationarity(nlp, pt);
  CHECK(r.lpNorm<Eigen::Infinity>() < 1e-6);
  Eigen::VectorXd c(nlp.num_cons());
  nlp.constraints(pt.x, c);
  CHECK(c.lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(max_complementarity(nlp, pt) < 1e-6);

  // Strict interiority and sign conditions at the returned point.
  for (int j = 0; j < nlp.num_vars(); ++j) {
    if (std::isfinite(nlp.lower()[j])) {
      CHECK(pt.x[j] > nlp.lower()[j]);
      CHECK(pt.zl[j] > 0.0);
    }
    if (std::isfinite(nlp.upper()[j])) {
      CHECK(pt.x[j] < nlp.upper()[j]);
      CHECK(pt.zu[j] > 0.0);
    }
  }
}

TEST_CASE("infeasible equality ends in restoration failure") {
  // x = 3 cannot hold inside [0, 1]; the violation bottoms out at 2.
  OptiGraph g;
  NodeId v = g.add_node();
  Expr x = g.add_variable(v, 0.0, 1.0, 0.5, "x");
  g.add_constraint(v, x, Sense::kEq, 3.0);
  g.add_objective_term(v, x);
  StandardNlp nlp = g.flatten();

  IpmOptions opt;
  auto [pt, rep] = solve(nlp, opt);
  CHECK(rep.status == Status::kRestorationFailure);
  CHECK(rep.restorations >= 1);
  CHECK(pt.x[0] > 0.7);
  CHECK(pt.x[0] <= 1.0);
  CHECK(rep.primal_infeasibility == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("negative curvature forces regularization") {
  // Concave objective: every Newton system is indefinite until delta_w kicks
  // in; descent from x=2 runs into the upper bound at 4.
  OptiGraph g;
  NodeId v = g.add_node();
  Expr x = g.add_variable(v, 0.0, 4.0, 2.0, "x");
  g.add_objective_term(v, -square(x - 1.0));
  StandardNlp nlp = g.flatten();

  IpmOptions opt;
  auto [pt, rep] = solve(nlp, opt);
  CHECK(rep.status == Status::kOptimal);
  CHECK(pt.x[0] == doctest::Approx(4.0).epsilon(1e-5));
  CHECK(rep.objective == doctest::Approx(-9.0).epsilon(1e-5));
  CHECK(rep.regularization_escalations >= 1);
}

TEST_CASE("oracle failure at the start point") {
  // sqrt(x - 2) cannot be evaluated anywhere in [0, 1].
  OptiGraph g;
  NodeId v = g.add_node();
  Expr x = g.add_variable(v, 0.0, 1.0, 0.5, "x");
  g.add_constraint(v, sqrt(x - 2.0), Sense::kEq, 1.0);
  g.add_objective_term(v, x);
  StandardNlp nlp = g.flatten();

  IpmOptions opt;
  auto [pt, rep] = solve(nlp, opt);
  CHECK(rep.status == Status::kTrialPointFailure);
  CHECK(rep.iterations == 0);
}

TEST_CASE("direct and Schwarz paths agree on a coupled chain") {
  StandardNlp direct_nlp = chain_model().flatten();
  IpmOptions direct_opt;
  direct_opt.linear.kind = LinearSolverOptions::Kind::kDirect;
  auto [pt_d, rep_d] = solve(direct_nlp, direct_opt);
  REQUIRE(rep_d.status == Status::kOptimal);

  for (auto iterator : {LinearSolverOptions::Iterator::kRichardson,
                        LinearSolverOptions::Iterator::kGmres}) {
    StandardNlp ras_nlp = chain_model().flatten();
    IpmOptions ras_opt;
    ras_opt.linear.kind = LinearSolverOptions::Kind::kRas;
    ras_opt.linear.iterator = iterator;
    ras_opt.linear.num_parts = 3;
    ras_opt.linear.omega = -1;  // auto overlap
    auto [pt_r, rep_r] = solve(ras_nlp, ras_opt);
    CHECK(rep_r.status == Status::kOptimal);
    CHECK(std::abs(rep_r.objective - rep_d.objective) <=
          1e-6 * (1.0 + std::abs(rep_d.objective)));
    CHECK((pt_r.x - pt_d.x).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}

TEST_CASE("iteration log is stable and thread-count independent") {
  StandardNlp nlp = chain_model().flatten();

  auto run = [&](int threads) {
    std::ostringstream log;
    IpmOptions opt;
    opt.threads = threads;
    opt.linear.kind = LinearSolverOptions::Kind::kRas;
    opt.linear.iterator = LinearSolverOptions::Iterator::kGmres;
    opt.linear.num_parts = 3;
    opt.linear.threads = threads;
    opt.log = &log;
    auto [pt, rep] = solve(nlp, opt);
    REQUIRE(rep.status == Status::kOptimal);
    return std::make_pair(log.str(), rep.objective);
  };

  auto [log1, obj1] = run(1);
  auto [log4, obj4] = run(4);
  CHECK(log1 == log4);
  CHECK(obj1 == obj4);  // bitwise identical

  // Parse the pinned column format.
  std::istringstream in(log1);
  std::string line;
  REQUIRE(std::getline(in, line));
  {
    std::istringstream head(line);
    std::vector<std::string> cols;
    for (std::string tok; head >> tok;) cols.push_back(tok);
    const std::vector<std::string> want = {"iter",     "objective", "pr_inf",
                                           "du_inf",   "mu",        "alpha_pr",
                                           "alpha_du", "lin_it",    "delta_w"};
    CHECK(cols == want);
  }
  int expected_iter = 0;
  double last_mu = kInfinity;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<std::string> cols;
    for (std::string tok; row >> tok;) cols.push_back(tok);
    REQUIRE(cols.size() == 9);
    CHECK(std::stoi(cols[0]) == expected_iter++);
    for (int k = 1; k < 9; ++k) CHECK(std::isfinite(std::stod(cols[k])));
    const double mu = std::stod(cols[4]);
    CHECK(mu <= last_mu);
    last_mu = mu;
    ++rows;
  }
  CHECK(rows >= 2);
}
