#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "graphnlp/kkt.hpp"
#include "graphnlp/nlp.hpp"

using namespace gnlp;

namespace {

Eigen::MatrixXd dense_of(const SparsityPattern& pat, const Eigen::VectorXd& v,
                         int size, bool symmetrize) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(size, size);
  for (int k = 0; k < pat.nnz(); ++k) {
    M(pat.rows[k], pat.cols[k]) += v[k];
    if (symmetrize && pat.rows[k] != pat.cols[k])
      M(pat.cols[k], pat.rows[k]) += v[k];
  }
  return M;
}

Eigen::MatrixXd dense_kkt(const KktSystem& K) {
  return dense_of(K.pattern(), K.values(), K.size(), true);
}

}  // namespace

TEST_CASE("textbook single-variable system") {
  // min x^2  s.t. x = 1,  x >= 0, assembled at x=1, lambda=0, zl=1, mu=1.
  OptiGraph g;
  NodeId n1 = g.add_node();
  Expr x = g.add_variable(n1, 0.0, kInfinity, 1.0, "x");
  g.add_constraint(n1, x, Sense::kEq, 1.0);
  g.add_objective_term(n1, square(x));
  StandardNlp nlp = g.flatten();

  KktSystem K(nlp);
  PrimalDualPoint pt;
  pt.x = Eigen::VectorXd::Constant(1, 1.0);
  pt.lambda = Eigen::VectorXd::Zero(1);
  pt.zl = Eigen::VectorXd::Constant(1, 1.0);
  pt.zu = Eigen::VectorXd::Zero(1);
  K.assemble(pt, 1.0, 0.0, 0.0);

  REQUIRE(K.size() == 2);
  Eigen::MatrixXd M = dense_kkt(K);
  CHECK(M(0, 0) == doctest::Approx(3.0).epsilon(1e-15));  // W=2 plus Sigma=1
  CHECK(M(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(M(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(M(1, 1) == doctest::Approx(0.0));
  CHECK(K.rhs()[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(K.rhs()[1] == doctest::Approx(0.0));
  CHECK(K.sigma()[0] == doctest::Approx(1.0));

  // matvec agrees with the dense expansion
  Eigen::VectorXd v(2);
  v << 1.0, 1.0;
  Eigen::VectorXd y = K.matvec(v);
  CHECK(y[0] == doctest::Approx(4.0));
  CHECK(y[1] == doctest::Approx(1.0));
}

TEST_CASE("sigma is zero for free variables and two-sided otherwise") {
  OptiGraph g;
  NodeId n1 = g.add_node();
  Expr a = g.add_variable(n1, 0.0, 4.0, 1.0, "a");
  Expr b = g.add_variable(n1, -kInfinity, kInfinity, 0.0, "b");
  g.add_objective_term(n1, square(a) + square(b));
  StandardNlp nlp = g.flatten();

  KktSystem K(nlp);
  PrimalDualPoint pt;
  pt.x = Eigen::VectorXd::Zero(2);
  pt.x[0] = 1.0;
  pt.lambda = Eigen::VectorXd::Zero(0);
  pt.zl = Eigen::VectorXd::Zero(2);
  pt.zu = Eigen::VectorXd::Zero(2);
  pt.zl[0] = 2.0;
  pt.zu[0] = 3.0;
  K.assemble(pt, 0.5, 0.0, 0.0);
  CHECK(K.sigma()[0] == doctest::Approx(2.0 / 1.0 + 3.0 / 3.0));
  CHECK(K.sigma()[1] == 0.0);
  // barrier gradient only touches the bounded component
  CHECK(K.rhs()[0] == doctest::Approx(-(2.0 - 0.5 / 1.0 + 0.5 / 3.0)));
  CHECK(K.rhs()[1] == doctest::Approx(0.0));
}

TEST_CASE("interiority is enforced") {
  OptiGraph g;
  NodeId n1 = g.add_node();
  Expr x = g.add_variable(n1, 0.0, 2.0, 1.0, "x");
  g.add_objective_term(n1, square(x));
  StandardNlp nlp = g.flatten();
  KktSystem K(nlp);

  PrimalDualPoint pt;
  pt.x = Eigen::VectorXd::Constant(1, 1.0);
  pt.lambda = Eigen::VectorXd::Zero(0);
  pt.zl = Eigen::VectorXd::Constant(1, 1.0);
  pt.zu = Eigen::VectorXd::Constant(1, 1.0);

  PrimalDualPoint bad = pt;
  bad.x[0] = 0.0;  // on the lower bound
  CHECK_THROWS_AS(K.assemble(bad, 0.1, 0.0, 0.0), NotInterior);
  bad = pt;
  bad.x[0] = 2.5;  // beyond the upper bound
  CHECK_THROWS_AS(K.assemble(bad, 0.1, 0.0, 0.0), NotInterior);
  bad = pt;
  bad.zl[0] = 0.0;  // nonpositive multiplier
  CHECK_THROWS_AS(K.assemble(bad, 0.1, 0.0, 0.0), NotInterior);
  CHECK_NOTHROW(K.assemble(pt, 0.1, 0.0, 0.0));
}

TEST_CASE("set_deltas matches a fresh assemble") {
  OptiGraph g;
  NodeId n1 = g.add_node();
  Expr a = g.add_variable(n1, 0.0, kInfinity, 0.5, "a");
  Expr b = g.add_variable(n1, -1.0, 1.0, 0.2, "b");
  g.add_constraint(n1, a * b, Sense::kLe, 2.0);
  g.add_objective_term(n1, square(a - 1.0) + square(b));
  StandardNlp nlp = g.flatten();

  PrimalDualPoint pt;
  pt.x = nlp.start();
  pt.lambda = Eigen::VectorXd::Constant(1, -0.3);
  pt.zl = Eigen::VectorXd::Constant(3, 0.7);
  pt.zu = Eigen::VectorXd::Constant(3, 0.4);

  KktSystem K(nlp);
  K.assemble(pt, 0.1, 1e-4, 1e-8);
  K.set_deltas(3e-2, 5e-7);

  KktSystem fresh(nlp);
  fresh.assemble(pt, 0.1, 3e-2, 5e-7);
  CHECK((K.values().array() == fresh.values().array()).all());
  CHECK((K.rhs().array() == fresh.rhs().array()).all());
  CHECK(K.delta_w() == 3e-2);
  CHECK(K.delta_c() == 5e-7);
}

TEST_CASE("bound step recovery on and off the central path") {
  OptiGraph g;
  NodeId n1 = g.add_node();
  g.add_variable(n1, 0.0, kInfinity, 1.0, "x");
  Expr y = g.add_variable(n1, 0.0, kInfinity, 2.0, "y");
  g.add_objective_term(n1, square(y));
  StandardNlp nlp = g.flatten();
  KktSystem K(nlp);

  PrimalDualPoint pt;
  pt.x = nlp.start();  // (1, 2)
  pt.lambda = Eigen::VectorXd::Zero(0);
  pt.zl = Eigen::VectorXd::Ones(2);
  pt.zu = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(2), dzl, dzu;

  K.recover_bound_step(pt, dx, 1.0, dzl, dzu);
  CHECK(dzl[0] == doctest::Approx(0.0));  // x z = mu already

  K.recover_bound_step(pt, dx, 0.0, dzl, dzu);
  CHECK(dzl[1] == doctest::Approx(-1.0));  // drives x z toward 0
  CHECK(dzu[1] == 0.0);                    // no upper bound
}

TEST_CASE("condensed solve reproduces the unreduced Newton system") {
  OptiGraph g;
  NodeId n1 = g.add_node();
  NodeId n2 = g.add_node();
  g.add_edge(n1, n2);
  Expr a = g.add_variable(n1, 0.0, 3.0, 0.5, "a");
  Expr b = g.add_variable(n1, -kInfinity, kInfinity, 0.3, "b");
  Expr c = g.add_variable(n2, -1.0, 2.0, 0.4, "c");
  g.add_constraint(n1, square(a) + b, Sense::kEq, 2.0);
  g.add_constraint(n2, square(c), Sense::kLe, 1.5);
  g.add_link_constraint(n2, a + c, 0.8);
  g.add_objective_term(n1, square(a - 1.0) + 0.1 * exp(b));
  g.add_objective_term(n2, square(c + 0.5));
  StandardNlp nlp = g.flatten();
  const int n = nlp.num_vars();
  const int m = nlp.num_cons();
  REQUIRE(n == 4);  // a, b, c, slack
  REQUIRE(m == 3);

  PrimalDualPoint pt;
  pt.x = nlp.start();
  pt.x[3] = 0.7;
  pt.lambda = Eigen::VectorXd(m);
  pt.lambda << 0.3, -0.2, 0.5;
  pt.zl = Eigen::VectorXd::Zero(n);
  pt.zu = Eigen::VectorXd::Zero(n);
  pt.zl[0] = 0.8;
  pt.zu[0] = 0.6;
  pt.zl[2] = 1.1;
  pt.zu[2] = 0.4;
  pt.zl[3] = 0.9;

  const double mu = 0.1, dw = 1e-3, dc = 1e-6;
  KktSystem K(nlp);
  K.assemble(pt, mu, dw, dc);

  Eigen::MatrixXd M = dense_kkt(K);
  Eigen::VectorXd d = M.fullPivLu().solve(K.rhs());
  Eigen::VectorXd dx = d.head(n), dl = d.tail(m), dzl, dzu;
  K.recover_bound_step(pt, dx, mu, dzl, dzu);

  Eigen::VectorXd grad(n), cons(m);
  nlp.gradient(pt.x, grad);
  nlp.constraints(pt.x, cons);
  Eigen::VectorXd hv(nlp.hessian_pattern().nnz()),
      jv(nlp.jacobian_pattern().nnz());
  nlp.hessian(pt.x, pt.lambda, 1.0, hv);
  nlp.jacobian(pt.x, jv);
  Eigen::MatrixXd W = dense_of(nlp.hessian_pattern(), hv, n, true);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  for (int k = 0; k < nlp.jacobian_pattern().nnz(); ++k)
    A(nlp.jacobian_pattern().rows[k], nlp.jacobian_pattern().cols[k]) += jv[k];

  const double tol = 1e-10 * (1.0 + K.rhs().norm());
  Eigen::VectorXd r1 = W * dx + dw * dx + A.transpose() * dl - dzl + dzu +
                       (grad + A.transpose() * pt.lambda - pt.zl + pt.zu);
  Eigen::VectorXd r2 = A * dx - dc * dl + cons;
  CHECK(r1.lpNorm<Eigen::Infinity>() < tol);
  CHECK(r2.lpNorm<Eigen::Infinity>() < tol);
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(nlp.lower()[j])) {
      const double gap = pt.x[j] - nlp.lower()[j];
      CHECK(std::abs(gap * dzl[j] + pt.zl[j] * dx[j] + gap * pt.zl[j] - mu) <
            tol);
    }
    if (std::isfinite(nlp.upper()[j])) {
      const double gap = nlp.upper()[j] - pt.x[j];
      CHECK(std::abs(gap * dzu[j] - pt.zu[j] * dx[j] + gap * pt.zu[j] - mu) <
            tol);
    }
  }

  // pattern is frozen: a second assemble at other values reuses the slots
  const std::vector<int> rows_before = K.pattern().rows;
  pt.x[0] = 0.6;
  K.assemble(pt, mu / 2, dw * 10, dc);
  CHECK(K.pattern().rows == rows_before);
}

TEST_CASE("coordinate dump is 1-based lower triangle") {
  OptiGraph g;
  NodeId n1 = g.add_node();
  Expr x = g.add_variable(n1, 0.0, kInfinity, 1.0, "x");
  g.add_constraint(n1, x, Sense::kEq, 1.0);
  g.add_objective_term(n1, square(x));
  StandardNlp nlp = g.flatten();
  KktSystem K(nlp);
  PrimalDualPoint pt;
  pt.x = Eigen::VectorXd::Constant(1, 1.0);
  pt.lambda = Eigen::VectorXd::Zero(1);
  pt.zl = Eigen::VectorXd::Constant(1, 1.0);
  pt.zu = Eigen::VectorXd::Zero(1);
  K.assemble(pt, 1.0, 0.0, 0.0);

  std::ostringstream out;
  K.dump(out);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    std::istringstream ls(line);
    int i = 0, j = 0;
    double v = 0.0;
    REQUIRE((ls >> i >> j >> v));
    CHECK(i >= 1);
    CHECK(j >= 1);
    CHECK(i >= j);  // lower triangle
    if (i == 1 && j == 1) CHECK(v == doctest::Approx(3.0));
  }
  CHECK(lines == K.pattern().nnz());
}
