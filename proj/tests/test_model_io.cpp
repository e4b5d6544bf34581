#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <vector>

#include "graphnlp/model_io.hpp"
#include "graphnlp/nlp.hpp"

using namespace gnlp;

namespace {

// Exercises every operator, all bound shapes, named/unnamed variables,
// explicit/default starts, all senses, a link constraint and a shared
// subtree.
OptiGraph sample_model() {
  OptiGraph g;
  NodeId n1 = g.add_node();
  NodeId n2 = g.add_node();
  g.add_edge(n1, n2);

  Expr x = g.add_variable(n1, 0.5, 4.0, 1.0, "x");
  Expr y = g.add_variable(n1, -kInfinity, 2.0);
  Expr w = g.add_variable(n1, -1.0, kInfinity, -0.5);
  Expr u = g.add_variable(n2, -kInfinity, kInfinity, 0.0, "u");

  Expr shared = square(x) + sin(y);
  g.add_constraint(n1, shared + exp(w) - log(x), Sense::kLe, 10.0, "inner1");
  g.add_constraint(n1, sqrt(x) * cos(y) - shared, Sense::kGe, -8.0);
  g.add_constraint(n1, signed_square(w) / (x + 3.0), Sense::kEq, 0.25);
  g.add_link_constraint(n2, pow_int(u, 3) - x + y, 1.5, "tie");
  g.add_objective_term(n1, square(x - 2.0) + pow_int(y, 4));
  g.add_objective_term(n2, 0.5 * square(u) - (-u));
  return g;
}

}  // namespace

TEST_CASE("round trip is byte identical") {
  OptiGraph g = sample_model();
  const std::string s1 = write_model(g);
  OptiGraph g2 = read_model(s1);
  CHECK(write_model(g2) == s1);

  // a second cycle stays fixed as well
  OptiGraph g3 = read_model(write_model(g2));
  CHECK(write_model(g3) == s1);
}

TEST_CASE("round trip preserves oracle values exactly") {
  OptiGraph g = sample_model();
  OptiGraph g2 = read_model(write_model(g));
  StandardNlp a = g.flatten();
  StandardNlp b = g2.flatten();
  auto same = [](const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    return p.size() == q.size() && (p.array() == q.array()).all();
  };
  REQUIRE(a.num_vars() == b.num_vars());
  REQUIRE(a.num_cons() == b.num_cons());
  CHECK(same(a.lower(), b.lower()));
  CHECK(same(a.upper(), b.upper()));
  CHECK(same(a.start(), b.start()));

  const Eigen::VectorXd& x = a.start();
  CHECK(a.objective(x) == b.objective(x));

  Eigen::VectorXd ga(a.num_vars()), gb(b.num_vars());
  a.gradient(x, ga);
  b.gradient(x, gb);
  CHECK(same(ga, gb));

  Eigen::VectorXd ca(a.num_cons()), cb(b.num_cons());
  a.constraints(x, ca);
  b.constraints(x, cb);
  CHECK(same(ca, cb));

  REQUIRE(a.jacobian_pattern().rows == b.jacobian_pattern().rows);
  REQUIRE(a.jacobian_pattern().cols == b.jacobian_pattern().cols);
  Eigen::VectorXd ja(a.jacobian_pattern().nnz()), jb(b.jacobian_pattern().nnz());
  a.jacobian(x, ja);
  b.jacobian(x, jb);
  CHECK(same(ja, jb));

  REQUIRE(a.hessian_pattern().rows == b.hessian_pattern().rows);
  Eigen::VectorXd lam = Eigen::VectorXd::Constant(a.num_cons(), 0.7);
  Eigen::VectorXd ha(a.hessian_pattern().nnz()), hb(b.hessian_pattern().nnz());
  a.hessian(x, lam, 1.0, ha);
  b.hessian(x, lam, 1.0, hb);
  CHECK(same(ha, hb));
}

TEST_CASE("unbounded sides and default starts are omitted from the text") {
  OptiGraph g;
  NodeId n = g.add_node();
  Expr x = g.add_variable(n, -kInfinity, kInfinity);
  g.add_objective_term(n, square(x));
  const std::string s = write_model(g);
  CHECK(s.find("\"lb\"") == std::string::npos);
  CHECK(s.find("\"ub\"") == std::string::npos);
  CHECK(s.find("\"start\"") == std::string::npos);
  CHECK(s.find("\"name\"") == std::string::npos);
}

TEST_CASE("malformed documents raise ParseError") {
  CHECK_THROWS_AS(read_model("not json at all"), ParseError);
  CHECK_THROWS_AS(read_model("{\"format\":\"other\",\"version\":1}"),
                  ParseError);
  CHECK_THROWS_AS(
      read_model("{\"format\":\"graphnlp-model\",\"version\":9,\"nodes\":0}"),
      ParseError);

  const std::string head = "{\"format\":\"graphnlp-model\",\"version\":1,";
  // unknown operator
  CHECK_THROWS_AS(
      read_model(head +
                 "\"nodes\":1,\"variables\":[{\"node\":1}],"
                 "\"objective\":[{\"node\":1,\"expr\":[\"tan\",[\"var\",0]]}]}"),
      ParseError);
  // variable index out of range
  CHECK_THROWS_AS(
      read_model(head +
                 "\"nodes\":1,\"variables\":[{\"node\":1}],"
                 "\"objective\":[{\"node\":1,\"expr\":[\"var\",3]}]}"),
      ParseError);
  // inequality link constraint
  CHECK_THROWS_AS(
      read_model(head +
                 "\"nodes\":1,\"variables\":[{\"node\":1}],"
                 "\"constraints\":[{\"node\":1,\"sense\":\"le\",\"rhs\":0.0,"
                 "\"link\":true,\"expr\":[\"var\",0]}]}"),
      ParseError);
  // edge mentioning a missing node wraps the model error
  CHECK_THROWS_AS(read_model(head + "\"nodes\":1,\"edges\":[[1,2]]}"),
                  ParseError);
  // wrong arity
  CHECK_THROWS_AS(
      read_model(head +
                 "\"nodes\":1,\"variables\":[{\"node\":1}],"
                 "\"objective\":[{\"node\":1,\"expr\":[\"add\",[\"var\",0]]}]}"),
      ParseError);
}

TEST_CASE("file helpers round trip through disk") {
  namespace fs = std::filesystem;
  OptiGraph g = sample_model();
  const fs::path path =
      fs::temp_directory_path() / "graphnlp_model_io_test.json";
  save_model(g, path.string());
  OptiGraph g2 = load_model(path.string());
  CHECK(write_model(g2) == write_model(g));
  std::remove(path.string().c_str());
  CHECK_THROWS_AS(load_model(path.string()), ParseError);
}
