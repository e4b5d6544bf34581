#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "graphnlp/linalg.hpp"
#include "graphnlp/nlp.hpp"

using namespace gnlp;

namespace {

struct TripletMatrix {
  SparsityPattern pattern;
  Eigen::VectorXd values;
  int size{0};
};

TripletMatrix from_dense(const Eigen::MatrixXd& M) {
  TripletMatrix t;
  t.size = static_cast<int>(M.rows());
  std::vector<double> vals;
  for (int i = 0; i < t.size; ++i)
    for (int j = 0; j <= i; ++j)
      if (M(i, j) != 0.0) {
        t.pattern.rows.push_back(i);
        t.pattern.cols.push_back(j);
        vals.push_back(M(i, j));
      }
  t.values = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
  return t;
}

MatVec dense_matvec(const Eigen::MatrixXd& M) {
  return [M](const Eigen::VectorXd& v) -> Eigen::VectorXd { return M * v; };
}

Preconditioner identity_prec() {
  return [](const Eigen::VectorXd& r, Eigen::VectorXd& out) { out = r; };
}

// symmetric quasi-definite: SPD upper-left block, negative definite
// lower-right block, arbitrary coupling
Eigen::MatrixXd random_sqd(int n1, int n2, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rand_mat = [&](int r, int c) {
    Eigen::MatrixXd A(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) A(i, j) = u(rng);
    return A;
  };
  Eigen::MatrixXd R = rand_mat(n1, n1), S = rand_mat(n2, n2),
                  F = rand_mat(n2, n1);
  const int n = n1 + n2;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  M.topLeftCorner(n1, n1) =
      R * R.transpose() + 0.5 * Eigen::MatrixXd::Identity(n1, n1);
  M.bottomRightCorner(n2, n2) =
      -(S * S.transpose() + 0.5 * Eigen::MatrixXd::Identity(n2, n2));
  M.bottomLeftCorner(n2, n1) = F;
  M.topRightCorner(n1, n2) = F.transpose();
  return M;
}

AdjacencyList path_adjacency(int n) {
  AdjacencyList adj(n);
  for (int i = 0; i + 1 < n; ++i) {
    adj[i].push_back(i + 1);
    adj[i + 1].push_back(i);
  }
  return adj;
}

std::vector<std::vector<int>> unit_sets(int n) {
  std::vector<std::vector<int>> u(n);
  for (int i = 0; i < n; ++i) u[i] = {i};
  return u;
}

// Laplacian-like tridiagonal: couplings only between path neighbors.
Eigen::MatrixXd tridiag(int n, double diag) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    M(i, i) = diag;
    if (i + 1 < n) {
      M(i + 1, i) = -1.0;
      M(i, i + 1) = -1.0;
    }
  }
  return M;
}

Eigen::VectorXd ras_apply(const RasPreconditioner& P,
                          const Eigen::VectorXd& r) {
  Eigen::VectorXd out;
  P.apply(r, out);
  return out;
}

}  // namespace

TEST_CASE("direct factor solves a diagonal system") {
  Eigen::MatrixXd M(2, 2);
  M << 2.0, 0.0, 0.0, -3.0;
  TripletMatrix t = from_dense(M);
  DirectFactor f;
  f.factor(t.pattern, t.values, t.size);
  Eigen::VectorXd b(2);
  b << 4.0, 3.0;
  Eigen::VectorXd x = f.solve(b);
  CHECK(x[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("zero diagonal needs the 2x2 pivot path") {
  Eigen::MatrixXd M(2, 2);
  M << 0.0, 1.0, 1.0, 0.0;
  TripletMatrix t = from_dense(M);
  DirectFactor f;
  f.factor(t.pattern, t.values, t.size);
  Eigen::VectorXd b(2);
  b << 1.0, 1.0;
  Eigen::VectorXd x = f.solve(b);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("singular matrices are rejected") {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2, 2);
  M(0, 0) = 1.0;  // second row identically zero
  TripletMatrix t = from_dense(M);
  t.pattern.rows.push_back(1);  // keep the zero diagonal entry explicit
  t.pattern.cols.push_back(1);
  Eigen::VectorXd v(t.values.size() + 1);
  v << t.values, 0.0;
  DirectFactor f;
  CHECK_THROWS_AS(f.factor(t.pattern, v, 2), SingularMatrix);
}

TEST_CASE("random quasi-definite systems solve to 1e-10") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd M = random_sqd(30, 20, rng);
    TripletMatrix t = from_dense(M);
    DirectFactor f;
    f.factor(t.pattern, t.values, t.size);
    Eigen::VectorXd b(t.size);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < t.size; ++i) b[i] = u(rng);
    Eigen::VectorXd x = f.solve(b);
    CHECK((M * x - b).norm() / b.norm() <= 1e-10);
    CHECK(f.last_relative_residual() <= 1e-10);
    // the factorization is reusable for further right-hand sides
    Eigen::VectorXd b2 = 2.0 * b;
    CHECK((M * f.solve(b2) - b2).norm() / b2.norm() <= 1e-10);
  }
}

TEST_CASE("refactor reuses the pattern with new values") {
  Eigen::MatrixXd M(2, 2);
  M << 2.0, 1.0, 1.0, -1.0;
  TripletMatrix t = from_dense(M);
  DirectFactor f;
  f.factor(t.pattern, t.values, t.size);
  Eigen::VectorXd scaled = 3.0 * t.values;
  f.refactor(scaled);
  Eigen::VectorXd b(2);
  b << 3.0, 0.0;
  Eigen::VectorXd x = f.solve(b);
  CHECK(((3.0 * M) * x - b).norm() <= 1e-12);
}

TEST_CASE("diagonal matrix with zero overlap is inverted in one application") {
  const int n = 6;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) M(i, i) = i % 2 ? -(i + 1.0) : i + 1.0;
  TripletMatrix t = from_dense(M);
  SubdomainMap map = build_subdomains(path_adjacency(n), unit_sets(n), 3, 0);
  RasPreconditioner P(t.pattern, t.values, t.size, map);
  Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(n, 1.0, 6.0);
  Eigen::VectorXd out = ras_apply(P, r);
  for (int i = 0; i < n; ++i)
    CHECK(out[i] == doctest::Approx(r[i] / M(i, i)).epsilon(1e-15));
}

TEST_CASE("centralized limits reproduce the direct solution") {
  std::mt19937 rng(11);
  Eigen::MatrixXd M = random_sqd(12, 8, rng);
  TripletMatrix t = from_dense(M);
  // couple every pair of graph nodes through a complete-ish graph is not
  // needed: a path with omega = diameter reaches every index anyway
  const int nodes = 5;
  std::vector<std::vector<int>> sets(nodes);
  for (int i = 0; i < t.size; ++i) sets[i % nodes].push_back(i);
  for (auto& s : sets) std::sort(s.begin(), s.end());
  AdjacencyList adj = path_adjacency(nodes);

  Eigen::VectorXd b(t.size);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < t.size; ++i) b[i] = u(rng);
  DirectFactor f;
  f.factor(t.pattern, t.values, t.size);
  const Eigen::VectorXd xd = f.solve(b);

  SUBCASE("single block") {
    SubdomainMap map = build_subdomains(adj, sets, 1, 0);
    RasPreconditioner P(t.pattern, t.values, t.size, map);
    CHECK(P.centralized());
    CHECK((ras_apply(P, b) - xd).norm() <= 1e-10 * (1.0 + xd.norm()));
  }
  SUBCASE("maximal overlap with several blocks") {
    SubdomainMap map = build_subdomains(adj, sets, 3, 4);  // 4 = diameter
    RasPreconditioner P(t.pattern, t.values, t.size, map);
    CHECK(P.centralized());
    CHECK((ras_apply(P, b) - xd).norm() <= 1e-10 * (1.0 + xd.norm()));
    // one Richardson step therefore converges
    Eigen::VectorXd d;
    IterStats st = richardson(dense_matvec(M), b,
                              [&](const Eigen::VectorXd& r,
                                  Eigen::VectorXd& o) { o = ras_apply(P, r); },
                              d, 1e-10, 50);
    CHECK(st.converged);
    CHECK(st.iterations == 1);
  }
}

TEST_CASE("zero overlap application equals a block-Jacobi update") {
  std::mt19937 rng(23);
  const int n = 24;
  Eigen::MatrixXd M = tridiag(n, 2.5);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int i = 0; i < n; ++i) M(i, i) *= u(rng);
  TripletMatrix t = from_dense(M);
  SubdomainMap map = build_subdomains(path_adjacency(n), unit_sets(n), 4, 0);
  RasPreconditioner P(t.pattern, t.values, t.size, map);

  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = u(rng);
  Eigen::VectorXd out = ras_apply(P, r);

  Eigen::VectorXd jacobi = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < map.K; ++k) {
    const auto& w = map.W[k];
    const int nk = static_cast<int>(w.size());
    Eigen::MatrixXd Mk(nk, nk);
    Eigen::VectorXd rk(nk);
    for (int i = 0; i < nk; ++i) {
      rk[i] = r[w[i]];
      for (int j = 0; j < nk; ++j) Mk(i, j) = M(w[i], w[j]);
    }
    Eigen::VectorXd xk = Mk.fullPivLu().solve(rk);
    for (int i = 0; i < nk; ++i) jacobi[w[i]] = xk[i];
  }
  CHECK((out - jacobi).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("larger overlap reduces the residual faster") {
  const int n = 40;
  Eigen::MatrixXd M = tridiag(n, 2.01);
  TripletMatrix t = from_dense(M);
  Eigen::VectorXd p = Eigen::VectorXd::Ones(n);

  auto run = [&](int omega) {
    SubdomainMap map =
        build_subdomains(path_adjacency(n), unit_sets(n), 2, omega);
    RasPreconditioner P(t.pattern, t.values, t.size, map);
    Eigen::VectorXd d;
    return richardson(dense_matvec(M), p,
                      [&](const Eigen::VectorXd& r, Eigen::VectorXd& o) {
                        o = ras_apply(P, r);
                      },
                      d, 1e-16, 10)
        .relative_residual;
  };
  CHECK(run(2) < run(0));
}

TEST_CASE("richardson basics") {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(5, 5);
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
  Eigen::VectorXd d;
  IterStats st = richardson(dense_matvec(I), p, identity_prec(), d, 1e-12, 50);
  CHECK(st.converged);
  CHECK(st.iterations == 1);
  CHECK((d - p).norm() <= 1e-14);

  // zero right-hand side needs no iterations
  st = richardson(dense_matvec(I), Eigen::VectorXd::Zero(5), identity_prec(),
                  d, 1e-12, 50);
  CHECK(st.converged);
  CHECK(st.iterations == 0);
}

TEST_CASE("richardson with one-level overlap matches the direct solution") {
  const int n = 30;
  Eigen::MatrixXd M = tridiag(n, 2.2);
  TripletMatrix t = from_dense(M);
  Eigen::VectorXd p(n);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < n; ++i) p[i] = u(rng);

  SubdomainMap map = build_subdomains(path_adjacency(n), unit_sets(n), 2, 1);
  RasPreconditioner P(t.pattern, t.values, t.size, map);
  Eigen::VectorXd d;
  IterStats st = richardson(dense_matvec(M), p,
                            [&](const Eigen::VectorXd& r, Eigen::VectorXd& o) {
                              o = ras_apply(P, r);
                            },
                            d, 1e-10, 200);
  CHECK(st.converged);
  Eigen::VectorXd xd = M.fullPivLu().solve(p);
  CHECK((d - xd).norm() <= 1e-8 * (1.0 + xd.norm()));
}

TEST_CASE("gmres basics and finite termination") {
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd p(4);
  p << 1.0, -2.0, 3.0, 0.5;
  Eigen::VectorXd d;
  IterStats st = gmres(dense_matvec(I), p, identity_prec(), d, 1e-12, 50, 20);
  CHECK(st.converged);
  CHECK(st.iterations == 1);

  const int n = 30;
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) += 0.2 * u(rng);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = u(rng);
  st = gmres(dense_matvec(A), b, identity_prec(), d, 1e-10, 100, n);
  CHECK(st.converged);
  CHECK(st.iterations <= n);
  CHECK((A * d - b).norm() <= 1e-10 * (1.0 + b.norm()));

  // residual estimates never increase within the (single) restart cycle
  for (std::size_t i = 1; i < st.residual_history.size(); ++i)
    CHECK(st.residual_history[i] <= st.residual_history[i - 1] + 1e-15);
}

TEST_CASE("gmres needs no more iterations than richardson") {
  const int n = 30;
  Eigen::MatrixXd M = tridiag(n, 2.2);
  TripletMatrix t = from_dense(M);
  Eigen::VectorXd p = Eigen::VectorXd::Ones(n);
  SubdomainMap map = build_subdomains(path_adjacency(n), unit_sets(n), 2, 1);
  RasPreconditioner P(t.pattern, t.values, t.size, map);
  Preconditioner prec = [&](const Eigen::VectorXd& r, Eigen::VectorXd& o) {
    o = ras_apply(P, r);
  };
  Eigen::VectorXd d1, d2;
  IterStats rich = richardson(dense_matvec(M), p, prec, d1, 1e-10, 200);
  IterStats gm = gmres(dense_matvec(M), p, prec, d2, 1e-10, 200, 100);
  CHECK(rich.converged);
  CHECK(gm.converged);
  CHECK(gm.iterations <= rich.iterations);
}

TEST_CASE("application is bit-identical across thread counts") {
  std::mt19937 rng(31);
  Eigen::MatrixXd M = random_sqd(25, 15, rng);
  TripletMatrix t = from_dense(M);
  const int nodes = 8;
  std::vector<std::vector<int>> sets(nodes);
  for (int i = 0; i < t.size; ++i) sets[i % nodes].push_back(i);
  for (auto& s : sets) std::sort(s.begin(), s.end());
  SubdomainMap map = build_subdomains(path_adjacency(nodes), sets, 4, 1);

  RasPreconditioner serial(t.pattern, t.values, t.size, map, 1);
  RasPreconditioner parallel(t.pattern, t.values, t.size, map, 4);
  Eigen::VectorXd r(t.size);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < t.size; ++i) r[i] = u(rng);
  Eigen::VectorXd a = ras_apply(serial, r);
  Eigen::VectorXd b = ras_apply(parallel, r);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("overlap adaptation rescues a failing iteration") {
  const int n = 32;
  Eigen::MatrixXd M = tridiag(n, 2.0);  // pure Laplacian-like, slow Jacobi
  TripletMatrix t = from_dense(M);
  SubdomainMap map = build_subdomains(path_adjacency(n), unit_sets(n), 4, 0);
  RasPreconditioner P(t.pattern, t.values, t.size, map);
  Eigen::VectorXd p = Eigen::VectorXd::Ones(n), d;
  MatVec mv = dense_matvec(M);
  Preconditioner prec = [&](const Eigen::VectorXd& r, Eigen::VectorXd& o) {
    o = ras_apply(P, r);
  };

  IterStats st = richardson(mv, p, prec, d, 1e-10, 5);
  int adaptations = 0;
  while (!st.converged) {
    REQUIRE(adapt_overlap(P, t.values));
    ++adaptations;
    st = richardson(mv, p, prec, d, 1e-10, 5);
  }
  CHECK(adaptations >= 1);
  CHECK(P.adaptations() == adaptations);
  CHECK(st.converged);
  Eigen::VectorXd xd = M.fullPivLu().solve(p);
  CHECK((d - xd).norm() <= 1e-8 * (1.0 + xd.norm()));

  // once centralized there is nothing left to grow
  while (adapt_overlap(P, t.values)) {
  }
  CHECK(P.centralized());
  CHECK_FALSE(adapt_overlap(P, t.values));
}

TEST_CASE("kkt solver driver: all configurations agree with direct") {
  OptiGraph g;
  NodeId n1 = g.add_node();
  NodeId n2 = g.add_node();
  g.add_edge(n1, n2);
  Expr a = g.add_variable(n1, 0.0, 3.0, 0.5, "a");
  Expr b = g.add_variable(n1, -kInfinity, kInfinity, 0.3, "b");
  Expr c = g.add_variable(n2, -1.0, 2.0, 0.4, "c");
  g.add_constraint(n1, square(a) + b, Sense::kEq, 2.0);
  g.add_link_constraint(n2, a + c, 0.8);
  g.add_objective_term(n1, square(a - 1.0) + square(b));
  g.add_objective_term(n2, square(c + 0.5));
  StandardNlp nlp = g.flatten();

  PrimalDualPoint pt;
  pt.x = nlp.start();
  pt.lambda = Eigen::VectorXd::Zero(nlp.num_cons());
  pt.zl = Eigen::VectorXd::Ones(nlp.num_vars());
  pt.zu = Eigen::VectorXd::Ones(nlp.num_vars());
  KktSystem K(nlp);
  K.assemble(pt, 0.1, 1e-3, 1e-6);

  LinearSolverOptions direct;
  KktSolver sd(nlp, direct);
  sd.prepare(K);
  Eigen::VectorXd dd;
  IterStats st = sd.solve(K, K.rhs(), dd, 1e-10);
  CHECK(st.converged);

  for (auto iter : {LinearSolverOptions::Iterator::kRichardson,
                    LinearSolverOptions::Iterator::kGmres}) {
    LinearSolverOptions ras;
    ras.kind = LinearSolverOptions::Kind::kRas;
    ras.iterator = iter;
    ras.num_parts = 2;
    ras.omega = 0;
    KktSolver sr(nlp, ras);
    sr.prepare(K);
    Eigen::VectorXd dr;
    IterStats si = sr.solve(K, K.rhs(), dr, 1e-10);
    CHECK(si.converged);
    CHECK((dr - dd).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + dd.norm()));
  }
}

TEST_CASE("singular subdomain reports the block index") {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(4, 4);
  M(1, 1) = 1.0;
  M(2, 2) = 1.0;
  M(3, 3) = 1.0;  // index 0 has an identically zero row
  TripletMatrix t = from_dense(M);
  t.pattern.rows.insert(t.pattern.rows.begin(), 0);
  t.pattern.cols.insert(t.pattern.cols.begin(), 0);
  Eigen::VectorXd v(t.values.size() + 1);
  v << 0.0, t.values;
  SubdomainMap map = build_subdomains(path_adjacency(4), unit_sets(4), 2, 0);
  try {
    RasPreconditioner P(t.pattern, v, 4, map);
    FAIL("expected SubdomainSingular");
  } catch (const SubdomainSingular& e) {
    CHECK(e.subdomain() == 0);
  }
}
