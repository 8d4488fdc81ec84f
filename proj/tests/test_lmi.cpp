#include <random>

#include <Eigen/Eigenvalues>

#include "algoforge/errors.hpp"
#include "algoforge/lmi.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace algoforge;

namespace {

double lmax(const MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("free scalar pushed below a strict bound") {
  LmiProblem prob;
  const int v = prob.add_scalar();
  SymExpr e(1);
  e.add_term(v, MatrixXd::Ones(1, 1));
  prob.require_negative(e, 1e-6);

  const LmiResult res = prob.solve();
  REQUIRE(res.status == LmiStatus::Feasible);
  CHECK(res.x(v) <= -1e-6);
  CHECK(res.margin >= 0.0);
  CHECK(res.margin == doctest::Approx(prob.point_margin(res.x)));
}

TEST_CASE("constant violation is reported infeasible") {
  LmiProblem prob;
  SymExpr e(2);
  e.add_constant(-MatrixXd::Identity(2, 2));
  prob.require_positive(e, 1e-3);  // -I > eps I can never hold

  const LmiResult res = prob.solve();
  REQUIRE(res.status == LmiStatus::Infeasible);
  CHECK(res.lower_bound > 0.0);
}

TEST_CASE("interval constraints land inside the interval") {
  LmiProblem prob;
  const int v = prob.add_scalar();
  SymExpr upper(1);  // x + 1 < 0
  upper.add_term(v, MatrixXd::Ones(1, 1));
  upper.add_constant(MatrixXd::Ones(1, 1));
  SymExpr lower(1);  // -x - 3 < 0
  lower.add_term(v, -MatrixXd::Ones(1, 1));
  lower.add_constant(-3.0 * MatrixXd::Ones(1, 1));
  prob.require_negative(upper, 0.0);
  prob.require_negative(lower, 0.0);

  const LmiResult res = prob.solve();
  REQUIRE(res.status == LmiStatus::Feasible);
  CHECK(res.x(v) < -1.0);
  CHECK(res.x(v) > -3.0);
}

TEST_CASE("discrete stability certificate for a contracting map") {
  MatrixXd a(2, 2);
  a << 0.5, 0.3, 0.0, 0.4;

  LmiProblem prob;
  const SymBlock m = prob.add_symmetric(2);
  SymExpr decay(2);  // A' M A - M < -eps I
  decay.add_congruence(m, a, 1.0);
  decay.add_congruence(m, MatrixXd::Identity(2, 2), -1.0);
  prob.require_negative(decay, 1e-6);
  SymExpr pos(2);  // M > eps I
  pos.add_congruence(m, MatrixXd::Identity(2, 2), -1.0);
  prob.require_negative(pos, 1e-6);

  const LmiResult res = prob.solve();
  REQUIRE(res.status == LmiStatus::Feasible);
  const MatrixXd mval = LmiProblem::unpack(m, res.x);
  CHECK(max_abs(mval - mval.transpose()) == 0.0);
  CHECK(lmax(MatrixXd(a.transpose() * mval * a - mval)) < 0.0);
  CHECK(lmax(MatrixXd(-mval)) < 0.0);
}

TEST_CASE("expanding map admits no stability certificate") {
  const MatrixXd a = 1.1 * MatrixXd::Identity(2, 2);

  LmiProblem prob;
  const SymBlock m = prob.add_symmetric(2);
  SymExpr decay(2);
  decay.add_congruence(m, a, 1.0);
  decay.add_congruence(m, MatrixXd::Identity(2, 2), -1.0);
  prob.require_negative(decay, 1e-4);
  SymExpr pos(2);
  pos.add_congruence(m, MatrixXd::Identity(2, 2), -1.0);
  prob.require_negative(pos, 1e-4);

  const LmiResult res = prob.solve();
  CHECK(res.status == LmiStatus::Infeasible);
}

TEST_CASE("expressions are affine and congruences expand correctly") {
  std::mt19937_64 rng(11);
  LmiProblem prob;
  const SymBlock m = prob.add_symmetric(3);
  const int v = prob.add_scalar();
  SymExpr e(2);
  const MatrixXd w = testsupport::random_matrix(rng, 3, 2);
  e.add_congruence(m, w, 1.0);
  MatrixXd coeff(2, 2);
  coeff << 1.0, 0.5, 0.5, -2.0;
  e.add_term(v, coeff);
  e.add_constant(0.3 * MatrixXd::Identity(2, 2));

  VectorXd xa = VectorXd::Zero(prob.var_count());
  VectorXd xb = VectorXd::Zero(prob.var_count());
  for (int i = 0; i < xa.size(); ++i) {
    xa(i) = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    xb(i) = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  }
  const MatrixXd zero = e.value(VectorXd::Zero(prob.var_count()));
  const MatrixXd gap =
      e.value(xa + xb) - e.value(xa) - e.value(xb) + zero;
  CHECK(max_abs(gap) < 1e-12);

  const MatrixXd mval = LmiProblem::unpack(m, xa);
  const MatrixXd direct = w.transpose() * mval * w + xa(v) * coeff +
                          0.3 * MatrixXd::Identity(2, 2);
  CHECK(max_abs(e.value(xa) - direct) < 1e-12);
}

TEST_CASE("symmetric block packing round trips") {
  LmiProblem prob;
  const SymBlock m = prob.add_symmetric(3);
  CHECK(m.var(1, 2) == m.var(2, 1));
  VectorXd x = VectorXd::Zero(prob.var_count());
  MatrixXd want(3, 3);
  want << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) x(m.var(i, j)) = want(i, j);
  CHECK(max_abs(LmiProblem::unpack(m, x) - want) == 0.0);
}

TEST_CASE("malformed problems are rejected") {
  LmiProblem prob;
  const SymBlock m = prob.add_symmetric(2);
  SymExpr e(3);
  CHECK_THROWS_AS(e.add_constant(MatrixXd::Identity(2, 2)), MalformedProblem);
  CHECK_THROWS_AS(e.add_term(0, MatrixXd::Identity(2, 2)), MalformedProblem);
  CHECK_THROWS_AS(e.add_congruence(m, MatrixXd::Identity(2, 2)), MalformedProblem);
  MatrixXd skew(3, 3);
  skew << 0, 1, 0, -1, 0, 0, 0, 0, 0;
  CHECK_THROWS_AS(e.add_constant(skew), MalformedProblem);

  SymExpr beyond(1);
  beyond.add_term(99, MatrixXd::Ones(1, 1));
  CHECK_THROWS_AS(prob.require_negative(beyond, 0.0), MalformedProblem);
  SymExpr fine(1);
  fine.add_term(0, MatrixXd::Ones(1, 1));
  CHECK_THROWS_AS(prob.require_negative(fine, -1.0), MalformedProblem);
}
