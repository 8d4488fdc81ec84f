#include "algoforge/oracles.hpp"

#include <doctest.h>

#include "algoforge/errors.hpp"
#include "support.hpp"

using namespace algoforge;
using testsupport::random_matrix;

namespace {

// Checks w against the graph membership w in df(v + d w) block by block.
double membership_residual(const BlockOracle& f, const MatrixXd& d, const VectorXd& v,
                           const VectorXd& w) {
  const VectorXd z = v + d * w;
  if (const auto* q = std::get_if<GeneralQuadratic>(&f))
    return (w - q->q * (z - q->beta0)).cwiseAbs().maxCoeff();
  if (const auto* t = std::get_if<TestQuadratic>(&f))
    return (w - (t->m * z + t->b)).cwiseAbs().maxCoeff();
  if (const auto* s = std::get_if<ScaledL1>(&f)) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (std::abs(z(i)) > 1e-10)
        r = std::max(r, std::abs(w(i) - std::copysign(s->weight, z(i))));
      else
        r = std::max(r, std::max(std::abs(w(i)) - s->weight, 0.0));
    }
    return r;
  }
  if (const auto* l = std::get_if<L1BallIndicator>(&f)) {
    // Normal cone: inside -> w = 0; on the sphere -> w = theta * sign pattern.
    if (z.lpNorm<1>() < l->radius - 1e-9) return w.cwiseAbs().maxCoeff();
    double theta = w.cwiseAbs().maxCoeff(), r = std::abs(z.lpNorm<1>() - l->radius);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (std::abs(z(i)) > 1e-10)
        r = std::max(r, std::abs(w(i) - std::copysign(theta, z(i))));
      else
        r = std::max(r, std::max(std::abs(w(i)) - theta, 0.0));
    }
    return r;
  }
  return w.cwiseAbs().maxCoeff();  // ZeroOracle
}

}  // namespace

TEST_CASE("l1 ball projection satisfies the optimality pattern") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXd v = random_matrix(rng, 6, 1, 3.0);
    const double r = 0.5 + 0.4 * trial;
    const VectorXd z = project_l1_ball(v, r);
    CHECK(z.lpNorm<1>() <= r * (1 + 1e-12) + 1e-12);
    if (v.lpNorm<1>() <= r) {
      CHECK((z - v).cwiseAbs().maxCoeff() == 0.0);
      continue;
    }
    CHECK(z.lpNorm<1>() == doctest::Approx(r).epsilon(1e-12));
    // Residual v - z must be theta * sign(z) on the support, |.| <= theta off it.
    double theta = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (std::abs(z(i)) > 1e-12) theta = std::max(theta, std::abs(v(i) - z(i)));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(z(i)) > 1e-12)
        CHECK(std::abs(v(i) - z(i) - std::copysign(theta, z(i))) < 1e-10);
      else
        CHECK(std::abs(v(i)) <= theta + 1e-10);
    }
  }
}

TEST_CASE("resolvent evaluations satisfy graph membership") {
  std::mt19937_64 rng(22);
  const int c = 4;
  std::vector<BlockOracle> oracles;
  MatrixXd qm = random_matrix(rng, c, c);
  qm = (qm * qm.transpose() + MatrixXd::Identity(c, c)).eval();
  oracles.push_back(GeneralQuadratic{qm, random_matrix(rng, c, 1, 2.0)});
  oracles.push_back(TestQuadratic{0.7, random_matrix(rng, c, 1, 2.0)});
  oracles.push_back(ScaledL1{0.9});
  oracles.push_back(L1BallIndicator{1.5});
  oracles.push_back(ZeroOracle{});
  for (const auto& f : oracles) {
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd v = random_matrix(rng, c, 1, 4.0);
      MatrixXd d;
      if (is_quadratic(f)) {
        d = 0.2 * random_matrix(rng, c, c);
        d -= 0.8 * MatrixXd::Identity(c, c);
      } else {
        d = -0.6 * MatrixXd::Identity(c, c);
      }
      const VectorXd w = eval_yosida(f, d, v);
      CHECK(membership_residual(f, d, v, w) < 1e-8);
    }
  }
}

TEST_CASE("scalar coupling intervals match the well-posedness test") {
  const auto one = [](double lam) {
    MatrixXd d(1, 1);
    d << lam;
    return d;
  };
  // m > 0, L = inf: well posed on (-inf, 0) and (1/m, inf).
  CHECK(yosida_well_posed(2.0, kInf, one(-0.5)));
  CHECK_FALSE(yosida_well_posed(2.0, kInf, one(0.2)));
  CHECK(yosida_well_posed(2.0, kInf, one(0.6)));
  // m = 0: only negative couplings.
  CHECK(yosida_well_posed(0.0, kInf, one(-1e-3)));
  CHECK_FALSE(yosida_well_posed(0.0, kInf, one(0.0)));
  CHECK_FALSE(yosida_well_posed(0.0, kInf, one(0.3)));
  // m < 0: the bounded interval (1/m, 0).
  CHECK(yosida_well_posed(-1.0, kInf, one(-0.5)));
  CHECK_FALSE(yosida_well_posed(-1.0, kInf, one(-1.5)));
  CHECK_FALSE(yosida_well_posed(-1.0, kInf, one(0.1)));
  // Finite sector with zero coupling is always fine.
  CHECK(yosida_well_posed(1.0, 10.0, MatrixXd::Zero(2, 2)));
  // Degenerate sector widens instead of dividing by zero.
  CHECK(yosida_well_posed(1.0, 1.0, MatrixXd::Zero(2, 2)));
}

TEST_CASE("subgradients are rejected at set-valued points") {
  VectorXd v(2);
  v << 1.0, 0.0;
  CHECK_THROWS_AS(eval_subgradient(ScaledL1{1.0}, v), NotSingleValued);
  v << 0.4, -0.2;
  CHECK((eval_subgradient(ScaledL1{2.0}, v) - (VectorXd(2) << 2, -2).finished())
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  CHECK(eval_subgradient(L1BallIndicator{2.0}, v).cwiseAbs().maxCoeff() == 0.0);
  v << 2.0, 0.0;
  CHECK_THROWS_AS(eval_subgradient(L1BallIndicator{2.0}, v), NotSingleValued);
  VectorXd lo = VectorXd::Constant(2, -1), hi = VectorXd::Constant(2, 1);
  v << 0.2, 0.3;
  CHECK(eval_subgradient(BoxIndicator{lo, hi}, v).cwiseAbs().maxCoeff() == 0.0);
  v << 1.0, 0.3;
  CHECK_THROWS_AS(eval_subgradient(BoxIndicator{lo, hi}, v), NotSingleValued);
}

TEST_CASE("set-valued blocks demand scalar negative coupling") {
  VectorXd v(2);
  v << 3.0, -1.0;
  MatrixXd bad(2, 2);
  bad << -1.0, 0.5, 0.0, -1.0;
  CHECK_THROWS_AS(eval_yosida(ScaledL1{1.0}, bad, v), std::invalid_argument);
  CHECK_THROWS_AS(eval_yosida(ScaledL1{1.0}, 0.4 * MatrixXd::Identity(2, 2), v),
                  WellPosednessViolated);
  // Zero coupling falls back to the subgradient.
  const VectorXd g = eval_yosida(ScaledL1{1.0}, MatrixXd::Zero(2, 2), v);
  CHECK(g(0) == doctest::Approx(1.0));
  CHECK(g(1) == doctest::Approx(-1.0));
}

TEST_CASE("soft-threshold resolvent matches the closed form") {
  VectorXd v(3);
  v << 2.0, -0.3, 0.7;
  const double gamma = 0.5;
  const VectorXd w =
      eval_yosida(ScaledL1{1.0}, -gamma * MatrixXd::Identity(3, 3), v);
  const VectorXd want = (v - soft_threshold(v, gamma)) / gamma;
  CHECK((w - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("fixed-point-centered evaluation vanishes at the fixed point") {
  std::mt19937_64 rng(23);
  MatrixXd qm = random_matrix(rng, 3, 3);
  qm = (qm * qm.transpose() + 0.5 * MatrixXd::Identity(3, 3)).eval();
  const GeneralQuadratic f{qm, random_matrix(rng, 3, 1)};
  const VectorXd beta_star = random_matrix(rng, 3, 1);
  const VectorXd g_star = qm * (beta_star - f.beta0);
  const MatrixXd d = -0.7 * MatrixXd::Identity(3, 3) + 0.1 * random_matrix(rng, 3, 3);
  CHECK(eval_yosida_shifted(BlockOracle{f}, d, VectorXd::Zero(3), beta_star, g_star)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("class construction validates sector bounds") {
  VectorXd m(2), L(2);
  m << 1.0, 0.0;
  L << 1.0, kInf;
  const OracleClass k = make_oracle_class(m, L, 3);
  CHECK(k.s() == 2);
  const OracleClass widened = widen_degenerate(k);
  CHECK(widened.L(0) > 1.0);
  CHECK(widened.L(1) == kInf);
  L << 0.5, kInf;
  CHECK_THROWS_AS(make_oracle_class(m, L, 3), std::invalid_argument);
  CHECK(sector_sigma(1.0, kInf) == 0.0);
  CHECK(sector_sigma_l(1.0, kInf) == 1.0);
  CHECK(sector_sigma(1.0, 10.0) == doctest::Approx(1.0 / 9.0));
  CHECK(sector_sigma_l(1.0, 10.0) == doctest::Approx(10.0 / 9.0));
}
