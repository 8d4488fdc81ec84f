#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "algoforge/analysis.hpp"
#include "algoforge/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace algoforge;

namespace {

StateSpace gradient_descent(double alpha) {
  MatrixXd a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << 1.0;
  b << -alpha;
  c << 1.0;
  d << 0.0;
  return make_state_space(a, b, c, d);
}

double min_eig(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("identity coefficients pass through unchanged") {
  const FilterCoefficients lam = identity_filter(2, 3);
  CHECK(filter_valid(lam, 0.7));
  CHECK(filter_valid(lam, 1.2));

  const StateSpace psi = build_filter(lam, 2);
  CHECK(psi.n() == 2 * 3 * 2);
  CHECK(max_abs(psi.d - MatrixXd::Identity(4, 4)) == 0.0);
  CHECK(max_abs(psi.c) == 0.0);

  FilterCoefficients bad = lam;
  bad.lambda(0, 2) = 0.05;  // positive tail coefficient
  CHECK_FALSE(filter_valid(bad, 0.7));
  bad.lambda(0, 2) = -2.0;  // kills the weighted sum at small rho
  CHECK_FALSE(filter_valid(bad, 0.5));
}

TEST_CASE("filter realization reproduces its impulse response") {
  FilterCoefficients lam;
  lam.nu_max = 2;
  lam.lambda = MatrixXd(2, 3);
  lam.lambda << 0.5, -0.1, -0.2, 1.0, -0.3, 0.0;
  const StateSpace psi = build_filter(lam, 1);
  REQUIRE(psi.inputs() == 2);
  REQUIRE(psi.outputs() == 2);

  for (int ch = 0; ch < 2; ++ch) {
    VectorXd x = VectorXd::Zero(psi.n());
    for (int k = 0; k < 5; ++k) {
      const VectorXd u =
          k == 0 ? VectorXd(VectorXd::Unit(2, ch)) : VectorXd(VectorXd::Zero(2));
      const VectorXd y = psi.c * x + psi.d * u;
      for (int out = 0; out < 2; ++out) {
        const double want =
            (out == ch && k <= lam.nu_max) ? lam.lambda(ch, k) : 0.0;
        CHECK(y(out) == doctest::Approx(want).epsilon(1e-12));
      }
      x = psi.a * x + psi.b * u;
    }
  }
}

TEST_CASE("averaging weights always induce valid coefficients") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double rho = 0.1 + 1.1 * unit(rng);
    MatrixXd mu(2, 4);
    for (int i = 0; i < mu.rows(); ++i) {
      mu(i, 0) = 0.1 + 2.0 * unit(rng);
      for (int nu = 1; nu < mu.cols(); ++nu) mu(i, nu) = 2.0 * unit(rng);
    }
    const FilterCoefficients lam = filter_from_averaging(mu, rho);
    CHECK(filter_valid(lam, rho));
    CHECK(max_abs(MatrixXd(lam.lambda.col(0) - mu.rowwise().sum())) < 1e-12);
    CHECK(lam.lambda(0, 2) == doctest::Approx(-rho * rho * mu(0, 2)));
  }
}

TEST_CASE("sector transform is the identity on the unnormalized class") {
  std::mt19937_64 rng(21);
  const StateSpace g = testsupport::random_system(rng, 3, 2, 2);
  const OracleClass cls = make_oracle_class(VectorXd::Zero(2),
                                            VectorXd::Constant(2, kInf), 1);
  const StateSpace t = sector_transform(g, cls);
  CHECK(max_abs(t.a - g.a) < 1e-12);
  CHECK(max_abs(t.b - g.b) < 1e-12);
  CHECK(max_abs(t.c - g.c) < 1e-12);
  CHECK(max_abs(t.d - g.d) < 1e-12);
}

TEST_CASE("sector transform matches its transfer-function form") {
  std::mt19937_64 rng(22);
  const StateSpace g = testsupport::random_system(rng, 4, 2, 2);
  VectorXd m(2), l(2);
  m << 0.5, 0.2;
  l << 3.0, kInf;
  const OracleClass cls = make_oracle_class(m, l, 1);
  const StateSpace t = sector_transform(g, cls);

  MatrixXd sigma = MatrixXd::Zero(2, 2), slope = MatrixXd::Zero(2, 2);
  for (int i = 0; i < 2; ++i) {
    sigma(i, i) = sector_sigma(m(i), l(i));
    slope(i, i) = m(i);
  }
  const MatrixXd d_expected =
      -sigma + g.d * (MatrixXd::Identity(2, 2) - slope * g.d).inverse();
  CHECK(max_abs(t.d - d_expected) < 1e-10);

  for (int k = 0; k < 5; ++k) {
    const std::complex<double> z =
        1.7 * std::exp(std::complex<double>(0.0, 0.4 + 0.8 * k));
    const Eigen::MatrixXcd gz = transfer_at(g, z);
    const Eigen::MatrixXcd want =
        (Eigen::MatrixXcd::Identity(2, 2) - gz * slope).inverse() * gz -
        sigma.cast<std::complex<double>>();
    CHECK((transfer_at(t, z) - want).cwiseAbs().maxCoeff() < 1e-9);
  }

  VectorXd bad_l = l;
  bad_l(0) = m(0);
  CHECK_THROWS_AS(sector_transform(g, make_oracle_class(m, bad_l, 1)),
                  std::invalid_argument);
}

TEST_CASE("rate weighting commutes with feedback interconnection") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const StateSpace p = testsupport::random_system(rng, 3, 3, 3);
    const StateSpace k = testsupport::random_system(rng, 2, 2, 2);
    const double rho = 0.4 + 0.1 * trial;
    const StateSpace a = rho_weight(star(p, 2, 2, k), rho);
    const StateSpace b = star(rho_weight(p, rho), 2, 2, rho_weight(k, rho));
    CHECK(max_abs(a.a - b.a) < 1e-12);
    CHECK(max_abs(a.b - b.b) < 1e-12);
    CHECK(max_abs(a.c - b.c) < 1e-12);
    CHECK(max_abs(a.d - b.d) < 1e-12);
  }
}

TEST_CASE("filtered stack is linear in the coefficients") {
  std::mt19937_64 rng(24);
  const StateSpace g = testsupport::random_system(rng, 3, 2, 2, 0.4);
  VectorXd m(2), l(2);
  m << 0.1, 0.0;
  l << 4.0, kInf;
  const OracleClass cls = make_oracle_class(m, l, 1);
  const double rho = 0.9;
  const FilteredSystem f = assemble_filtered(g, cls, rho, 2);
  REQUIRE(f.a.rows() == 2 * 2 * 1 + 3);

  const MatrixXd la = testsupport::random_matrix(rng, 2, 3);
  const MatrixXd lb = testsupport::random_matrix(rng, 2, 3);
  CHECK(max_abs(f.c_at(la + lb) - f.c_at(la) - f.c_at(lb)) < 1e-12);
  CHECK(max_abs(f.d_at(la + lb) - f.d_at(la) - f.d_at(lb)) < 1e-12);
  CHECK(max_abs(f.c_at(MatrixXd::Zero(2, 3))) == 0.0);

  FilterCoefficients lam;
  lam.nu_max = 2;
  lam.lambda = MatrixXd(2, 3);
  lam.lambda << 1.0, -0.2, -0.1, 0.8, 0.0, -0.3;
  const StateSpace direct = f.instance(lam);
  const StateSpace routed = cascade(
      build_filter(lam, 1), sector_transform(rho_weight(g, rho), cls));
  CHECK(testsupport::transfer_gap(direct, routed) < 1e-9);
}

TEST_CASE("filtered feedthrough matches the closed form at any rate") {
  std::mt19937_64 rng(25);
  MatrixXd d = testsupport::random_matrix(rng, 2, 2, 0.2);
  d(0, 1) = 0.0;
  const StateSpace g = make_state_space(
      testsupport::random_matrix(rng, 2, 2, 0.4),
      testsupport::random_matrix(rng, 2, 2), testsupport::random_matrix(rng, 2, 2),
      d);
  VectorXd m(2), l(2);
  m << 0.3, 0.1;
  l << 2.0, 5.0;
  const OracleClass cls = make_oracle_class(m, l, 1);

  const FilteredSystem fa = assemble_filtered(g, cls, 0.8, 1);
  const FilteredSystem fb = assemble_filtered(g, cls, 1.1, 1);
  const MatrixXd lam = testsupport::random_matrix(rng, 2, 2);
  CHECK(max_abs(fa.d_at(lam) - fb.d_at(lam)) < 1e-12);

  MatrixXd sigma = MatrixXd::Zero(2, 2), slope = MatrixXd::Zero(2, 2);
  for (int i = 0; i < 2; ++i) {
    sigma(i, i) = sector_sigma(m(i), l(i));
    slope(i, i) = m(i);
  }
  const MatrixXd dt =
      -sigma + d * (MatrixXd::Identity(2, 2) - slope * d).inverse();
  const MatrixXd big = lam.col(0).asDiagonal() * dt;
  CHECK(max_abs(fa.d_at(lam) - big) < 1e-10);
}

TEST_CASE("gradient descent is certified exactly above its known rate") {
  const double m = 1.0, l = 10.0;
  const StateSpace g = gradient_descent(2.0 / (l + m));
  const OracleClass cls =
      make_oracle_class(VectorXd::Constant(1, m), VectorXd::Constant(1, l), 1);

  const CertifyOutcome good =
      antipassivity_certify(g, cls, 0.85, 1, CertifyMode::Joint);
  REQUIRE(good.certified());
  CHECK(good.certificate->margin >= 0.0);
  CHECK(min_eig(good.certificate->lyapunov_m) > 0.0);
  CHECK(filter_valid(good.certificate->lambda, 0.85));

  const CertifyOutcome bad =
      antipassivity_certify(g, cls, 0.80, 1, CertifyMode::Joint);
  CHECK_FALSE(bad.certified());
  CHECK(bad.deficit > 0.0);

  const CertifyOutcome relaxed =
      antipassivity_certify(g, cls, 0.95, 1, CertifyMode::FixedLambda);
  CHECK(relaxed.certified());

  RateOptions opts;
  opts.nu_max = 1;
  const Certificate cert = analyze_rate(g, cls, opts);
  CHECK(std::abs(cert.rho - 9.0 / 11.0) <= 1e-2);
  CHECK(cert.margin >= 0.0);
  CHECK(cert.trace.size() >= 3);
  CHECK(cert.trace.front().first == doctest::Approx(1.5));
}

TEST_CASE("resolvent iteration reaches the strongly monotone rate") {
  MatrixXd a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << 1.0;
  b << -1.0;
  c << 1.0;
  d << -1.0;
  const StateSpace g = make_state_space(a, b, c, d);
  const OracleClass cls = make_oracle_class(VectorXd::Constant(1, 1.0),
                                            VectorXd::Constant(1, kInf), 1);
  RateOptions opts;
  opts.nu_max = 1;
  const Certificate cert = analyze_rate(g, cls, opts);
  CHECK(std::abs(cert.rho - 0.5) < 0.03);
}

TEST_CASE("certified rates bound simulated trajectories") {
  const double m = 1.0, l = 10.0;
  const StateSpace g = gradient_descent(2.0 / (l + m));
  const OracleClass cls =
      make_oracle_class(VectorXd::Constant(1, m), VectorXd::Constant(1, l), 1);
  const CertifyOutcome out =
      antipassivity_certify(g, cls, 0.85, 1, CertifyMode::Joint);
  REQUIRE(out.certified());
  const Certificate& cert = *out.certificate;

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> curv(m, l);
  std::uniform_real_distribution<double> start(-4.0, 4.0);
  for (int trial = 0; trial < 5; ++trial) {
    GeneralQuadratic quad;
    quad.q = MatrixXd::Constant(1, 1, curv(rng));
    quad.beta0 = VectorXd::Zero(1);
    const AlgorithmSystem alg = make_algorithm(g, {BlockOracle(quad)}, cls);
    SimulateOptions sopts;
    sopts.steps = 80;
    const Trajectory traj =
        simulate(alg, VectorXd::Constant(1, start(rng)), sopts);
    REQUIRE_FALSE(traj.diverged);
    CHECK(measure_rate(traj, VectorXd::Zero(1)) <= cert.rho + 0.02);
    const double dissipation =
        empirical_dissipation_check(traj, cls, cert.rho, cert.lambda);
    CHECK(dissipation >= -1e-8 * (1.0 + max_abs(traj.z)));
  }
}

TEST_CASE("dissipation sums stay nonnegative along class trajectories") {
  const StateSpace g = gradient_descent(0.15);
  const OracleClass cls = make_oracle_class(VectorXd::Constant(1, 1.0),
                                            VectorXd::Constant(1, 10.0), 1);
  GeneralQuadratic quad;
  quad.q = MatrixXd::Constant(1, 1, 7.0);
  quad.beta0 = VectorXd::Zero(1);
  const AlgorithmSystem alg = make_algorithm(g, {BlockOracle(quad)}, cls);
  SimulateOptions sopts;
  sopts.steps = 60;
  const Trajectory traj = simulate(alg, VectorXd::Constant(1, 2.5), sopts);

  const FilterCoefficients lam = identity_filter(1, 0);
  CHECK(empirical_dissipation_check(traj, cls, 0.9, lam) >= -1e-10);

  FilterCoefficients tail;
  tail.nu_max = 2;
  tail.lambda = MatrixXd(1, 3);
  tail.lambda << 1.0, -0.3, -0.1;
  REQUIRE(filter_valid(tail, 0.9));
  CHECK(empirical_dissipation_check(traj, cls, 0.9, tail) >= -1e-10);

  const Trajectory still = simulate(alg, VectorXd::Zero(1), sopts);
  CHECK(empirical_dissipation_check(still, cls, 0.9, lam) == 0.0);
}

TEST_CASE("degenerate sector bounds are widened before analysis") {
  MatrixXd a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << 0.5;
  b << 0.5;
  c << 1.0;
  d << 0.0;
  const StateSpace g = make_state_space(a, b, c, d);
  const OracleClass cls = make_oracle_class(VectorXd::Constant(1, 1.0),
                                            VectorXd::Constant(1, 1.0), 1);
  const CertifyOutcome out =
      antipassivity_certify(g, cls, 0.9, 1, CertifyMode::Joint);
  CHECK_FALSE(out.certified());  // loop is marginally stable at best
}

TEST_CASE("runaway recursions are never certified") {
  MatrixXd a(1, 1), b(1, 1), c(1, 1), d(1, 1);
  a << 2.0;
  b << 0.0;
  c << 1.0;
  d << 0.0;
  const StateSpace g = make_state_space(a, b, c, d);
  const OracleClass cls = make_oracle_class(VectorXd::Constant(1, 1.0),
                                            VectorXd::Constant(1, 2.0), 1);
  RateOptions opts;
  opts.nu_max = 1;
  CHECK_THROWS_AS(analyze_rate(g, cls, opts), NeverCertified);
}

TEST_CASE("analysis rejects malformed inputs") {
  const StateSpace g = gradient_descent(0.1);
  const OracleClass cls = make_oracle_class(VectorXd::Constant(1, 1.0),
                                            VectorXd::Constant(1, 10.0), 1);
  const OracleClass two = make_oracle_class(VectorXd::Zero(2),
                                            VectorXd::Constant(2, 1.0), 1);
  CHECK_THROWS_AS(antipassivity_certify(g, two, 0.9, 1, CertifyMode::Joint),
                  std::invalid_argument);
  CHECK_THROWS_AS(antipassivity_certify(g, cls, -0.5, 1, CertifyMode::Joint),
                  std::invalid_argument);

  FilterCoefficients invalid = identity_filter(1, 1);
  invalid.lambda(0, 1) = 0.4;
  CHECK_THROWS_AS(antipassivity_certify(g, cls, 0.9, 1, CertifyMode::FixedLambda,
                                        &invalid),
                  std::invalid_argument);

  // Feedthrough with an upper block breaks the sweep order premise.
  MatrixXd a(1, 1), b(1, 2), c(2, 1), d(2, 2);
  a << 1.0;
  b << -0.1, -0.1;
  c << 1.0, 1.0;
  d << 0.0, 0.5, 0.0, 0.0;
  const StateSpace upper = make_state_space(a, b, c, d);
  const OracleClass pair = make_oracle_class(VectorXd::Zero(2),
                                             VectorXd::Constant(2, 1.0), 1);
  CHECK_THROWS_AS(antipassivity_certify(upper, pair, 0.9, 1, CertifyMode::Joint),
                  IllPosed);
}
