#include <doctest.h>

#include <cmath>
#include <complex>

#include "algoforge/errors.hpp"
#include "algoforge/executor.hpp"
#include "algoforge/regulation.hpp"
#include "support.hpp"

using namespace algoforge;
using namespace testsupport;

namespace {

// Lossy two-block channel built directly from its transfer description:
// y1 = w1 delayed h steps through an alpha-leaky line, all other routes
// memoryless. Poles at alpha only.
Eigen::MatrixXcd channel_transfer(double alpha, int h, std::complex<double> z) {
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(4, 4);
  t(0, 2) = 1.0;
  t(1, 3) = 1.0;
  t(2, 0) = std::pow(z - alpha, -h);
  t(3, 1) = 1.0;
  return t;
}

// Realization of the mixed-stability exchange with transfer
//   [z1]   [0  0      | 1/(z+1.1)  0        ] [w1]
//   [z2] = [0  0      | 1/(z-0.3)  2        ] [w2]
//   [y1]   [1  1/z    | 2/z^2      1/(z-.9) ] [u1]
//   [y2]   [1  1-1/z^3| 0          1        ] [u2]
PartitionedPlant mixed_stability_network() {
  MatrixXd a = MatrixXd::Zero(8, 8);
  a(0, 0) = -1.1;
  a(1, 1) = 0.3;
  a(3, 2) = 1.0;
  a(4, 3) = 1.0;
  a(6, 5) = 1.0;
  a(7, 7) = 0.9;
  MatrixXd b1 = MatrixXd::Zero(8, 2);
  b1(2, 1) = 1.0;
  MatrixXd b2 = MatrixXd::Zero(8, 2);
  b2(0, 0) = 1.0;
  b2(1, 0) = 1.0;
  b2(5, 0) = 1.0;
  b2(7, 1) = 1.0;
  MatrixXd c1 = MatrixXd::Zero(2, 8);
  c1(0, 0) = 1.0;
  c1(1, 1) = 1.0;
  MatrixXd d12 = MatrixXd::Zero(2, 2);
  d12(1, 1) = 2.0;
  MatrixXd c2 = MatrixXd::Zero(2, 8);
  c2(0, 2) = 1.0;
  c2(0, 6) = 2.0;
  c2(0, 7) = 1.0;
  c2(1, 4) = -1.0;
  MatrixXd d21(2, 2);
  d21 << 1, 0, 1, 1;
  MatrixXd d2 = MatrixXd::Zero(2, 2);
  d2(1, 1) = 1.0;
  return make_partitioned_plant(a, b1, b2, c1, MatrixXd::Zero(2, 2), d12, c2, d21, d2,
                                2, 1);
}

Eigen::MatrixXcd mixed_stability_transfer(std::complex<double> z) {
  Eigen::MatrixXcd t(4, 4);
  std::complex<double> zero(0, 0), one(1, 0);
  t << zero, zero, 1.0 / (z + 1.1), zero,                              //
      zero, zero, 1.0 / (z - 0.3), 2.0 * one,                          //
      one, 1.0 / z, 2.0 / (z * z), 1.0 / (z - 0.9),                    //
      one, one - 1.0 / (z * z * z), zero, one;
  return t;
}

}  // namespace

TEST_CASE("default consensus directions") {
  MatrixXd n3 = default_consensus(3, 1);
  MatrixXd expected(3, 2);
  expected << 1, 0, 0, 1, -1, -1;
  CHECK(max_abs(n3 - expected) == 0.0);

  CHECK(default_consensus(1, 4).cols() == 0);
  CHECK(default_consensus(1, 4).rows() == 4);

  for (int s = 2; s <= 6; ++s) {
    MatrixXd n = default_consensus(s, 2);
    validate_consensus(n, s, 2);
    MatrixXd colsum = MatrixXd::Zero(2, (s - 1) * 2);
    for (int i = 0; i < s; ++i) colsum += n.middleRows(2 * i, 2);
    CHECK(max_abs(colsum) == 0.0);
  }
}

TEST_CASE("channel plant matches its transfer description") {
  PartitionedPlant p = make_channel_plant(0.5, 3, 1);
  StateSpace g = to_state_space(p);
  for (std::complex<double> z : {std::complex<double>(2.0, 0.0),
                                 std::complex<double>(0.7, 1.1),
                                 std::complex<double>(-1.4, 0.2)}) {
    CHECK((transfer_at(g, z) - channel_transfer(0.5, 3, z)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("channel regulator solution is the leaky-line gain sequence") {
  PartitionedPlant p = make_channel_plant(0.5, 3, 1);
  RegulatorSolution sol = solve_plant_regulator(p, default_consensus(2, 1));

  MatrixXd pi(3, 2), gamma(2, 2), phi(2, 2);
  pi << 0, 2, 0, 4, 0, 8;
  gamma << -1, 0, -1, 0;
  phi << 0, 8, 0, -1;
  CHECK(max_abs(sol.pi - pi) < 1e-8);
  CHECK(max_abs(sol.gamma - gamma) < 1e-8);
  CHECK(max_abs(sol.phi - phi) < 1e-8);

  // Same data with c = 3 scales every entry by an identity block.
  PartitionedPlant p3 = make_channel_plant(0.5, 3, 3);
  RegulatorSolution sol3 = solve_plant_regulator(p3, default_consensus(2, 3));
  CHECK(max_abs(sol3.gamma - kron_identity(gamma, 3)) < 1e-8);
  CHECK(max_abs(sol3.phi - kron_identity(phi, 3)) < 1e-8);
}

TEST_CASE("lossless channel admits no regulator solution") {
  PartitionedPlant p = make_channel_plant(1.0, 2, 1);
  CHECK_THROWS_AS(solve_plant_regulator(p, default_consensus(2, 1)), Infeasible);
}

TEST_CASE("memoryless exchange regulator is affine in the consensus data") {
  const int s = 3, c = 2;
  PartitionedPlant p = make_direct_plant(s, c);
  MatrixXd n = default_consensus(s, c);
  RegulatorSolution sol = solve_plant_regulator(p, n);

  CHECK(sol.pi.rows() == 0);
  MatrixXd gamma = MatrixXd::Zero(s * c, s * c);
  gamma.leftCols(c) = -kron_identity(MatrixXd::Ones(s, 1), c);
  MatrixXd phi = MatrixXd::Zero(s * c, s * c);
  phi.rightCols((s - 1) * c) = n;
  CHECK(max_abs(sol.gamma - gamma) < 1e-12);
  CHECK(max_abs(sol.phi - phi) < 1e-12);
}

TEST_CASE("mixed-stability network: realization and regulator maps") {
  PartitionedPlant p = mixed_stability_network();
  StateSpace g = to_state_space(p);
  for (std::complex<double> z : {std::complex<double>(2.0, 0.0),
                                 std::complex<double>(1.0, 0.0),
                                 std::complex<double>(0.6, 1.3)}) {
    CHECK((transfer_at(g, z) - mixed_stability_transfer(z)).cwiseAbs().maxCoeff() <
          1e-12);
  }

  MatrixXd n = default_consensus(2, 1);
  RegulatorSolution sol = solve_plant_regulator(p, n);
  MatrixXd gamma(2, 2);
  gamma << -2.1, 0, 1, 0;
  CHECK(max_abs(sol.gamma - gamma) < 1e-8);

  // The steady maps must reproduce the z = 1 transfer balance regardless of
  // the realization: T_zu(1) Gamma = -[1, 0] - T_zw(1) [0, N] and
  // Phi = T_yw(1) [0, N] + T_yu(1) Gamma.
  Eigen::MatrixXcd t1 = mixed_stability_transfer(1.0);
  MatrixXd t_zw = t1.topLeftCorner(2, 2).real();
  MatrixXd t_zu = t1.topRightCorner(2, 2).real();
  MatrixXd t_yw = t1.bottomLeftCorner(2, 2).real();
  MatrixXd t_yu = t1.bottomRightCorner(2, 2).real();
  MatrixXd w_of_d = MatrixXd::Zero(2, 2);
  w_of_d.rightCols(1) = n;
  MatrixXd z_target = MatrixXd::Zero(2, 2);
  z_target.leftCols(1) = -MatrixXd::Ones(2, 1);
  CHECK(max_abs(t_zu * sol.gamma + t_zw * w_of_d - z_target) < 1e-8);
  CHECK(max_abs(sol.phi - (t_yw * w_of_d + t_yu * sol.gamma)) < 1e-8);

  MatrixXd phi(2, 2);
  phi << 5.8, 0, 1, 1;
  CHECK(max_abs(sol.phi - phi) < 1e-8);
}

TEST_CASE("controller regulator: channel gains satisfy it, splitting gains do not") {
  PartitionedPlant p = make_channel_plant(0.5, 3, 1);
  RegulatorSolution sol = solve_plant_regulator(p, default_consensus(2, 1));

  // One-state controller whose input gains are scaled by the end-to-end line
  // gain beta = (1 - alpha)^h.
  const double b0 = -0.04, b1 = -0.2, b2 = -0.1, beta = 0.125;
  MatrixXd ac(1, 1), bc(1, 2), cc(2, 1), dc(2, 2);
  ac << 1;
  bc << beta * b0, b0;
  cc << 1, 1;
  dc << beta * b2, 0, beta * (b1 + b2), b1;
  StateSpace k = make_state_space(ac, bc, cc, dc);

  ControllerRegulator reg = solve_controller_regulator(k, sol.phi, sol.gamma);
  MatrixXd theta(1, 2);
  theta << -1, -b2;
  CHECK(max_abs(reg.theta - theta) < 1e-8);

  // A splitting tuned for the memoryless exchange fails on the channel.
  StateSpace dr = three_operator_splitting(1.0, 0.5, 1);
  MatrixXd dr_a = dr.a.topLeftCorner(1, 1);
  MatrixXd dr_b(1, 2), dr_c(2, 1), dr_d(2, 2);
  dr_b << dr.b(0, 0), dr.b(0, 1);
  dr_c << 1, 1;
  dr_d = dr.d.topLeftCorner(2, 2);
  StateSpace k_dr = make_state_space(dr_a, dr_b, dr_c, dr_d);
  CHECK_THROWS_AS(solve_controller_regulator(k_dr, sol.phi, sol.gamma), Infeasible);
}

TEST_CASE("controller regulator: accelerated forward-backward over the exchange") {
  const double q = 0.25, lam = 0.7;
  const double sq = std::sqrt(q);
  MatrixXd ac(2, 2), bc(2, 2), cc(2, 2), dc(2, 2);
  ac << 2 / (1 + sq), -(1 - sq) / (1 + sq), 1, 0;
  bc << -lam, -lam, 0, 0;
  cc << 2 / (1 + sq), -(1 - sq) / (1 + sq), 2 / (1 + sq), -(1 - sq) / (1 + sq);
  dc << 0, 0, lam, lam;
  StateSpace k = make_state_space(ac, bc, cc, dc);

  PartitionedPlant p = make_direct_plant(2, 1);
  RegulatorSolution sol = solve_plant_regulator(p, default_consensus(2, 1));
  ControllerRegulator reg = solve_controller_regulator(k, sol.phi, sol.gamma);
  MatrixXd theta(2, 2);
  theta << -1, 0, -1, 0;
  CHECK(max_abs(reg.theta - theta) < 1e-10);
}

TEST_CASE("regulator solution rebases with the disagreement basis") {
  std::mt19937_64 rng(41);
  PartitionedPlant p = make_channel_plant(0.3, 2, 2);
  MatrixXd n = default_consensus(2, 2);
  RegulatorSolution sol = solve_plant_regulator(p, n);

  MatrixXd w = random_matrix(rng, 2, 2);
  w += 3.0 * MatrixXd::Identity(2, 2);  // keep it invertible
  RegulatorSolution direct = solve_plant_regulator(p, n * w);
  RegulatorSolution rebased = rebase_consensus(sol, w, 2);
  CHECK(max_abs(direct.pi - rebased.pi) < 1e-8);
  CHECK(max_abs(direct.gamma - rebased.gamma) < 1e-8);
  CHECK(max_abs(direct.phi - rebased.phi) < 1e-8);
}

TEST_CASE("mean closure agrees with the mirrored loop factorization") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const int s = 2, c = 2, n = 3;
    MatrixXd a = 0.4 * random_matrix(rng, n, n);
    MatrixXd b1 = random_matrix(rng, n, s * c), b2 = random_matrix(rng, n, s * c);
    MatrixXd c1 = random_matrix(rng, s * c, n), c2 = random_matrix(rng, s * c, n);
    MatrixXd d1 = 0.2 * random_matrix(rng, s * c, s * c);
    MatrixXd d12 = random_matrix(rng, s * c, s * c);
    MatrixXd d21 = random_matrix(rng, s * c, s * c);
    MatrixXd d2 = random_matrix(rng, s * c, s * c);
    PartitionedPlant p = make_partitioned_plant(a, b1, b2, c1, d1, d12, c2, d21, d2,
                                                s, c);
    VectorXd m(2);
    m << 0.9, -0.4;
    MatrixXd nc = default_consensus(s, c);
    MeanClosure mc = close_plant_mean(p, m, nc);

    VectorXd x = random_matrix(rng, n, 1), d = random_matrix(rng, s * c, 1),
             u = random_matrix(rng, s * c, 1);
    MatrixXd mm = MatrixXd::Zero(s * c, s * c);
    mm.topLeftCorner(c, c) = m(0) * MatrixXd::Identity(c, c);
    mm.bottomRightCorner(c, c) = m(1) * MatrixXd::Identity(c, c);
    MatrixXd e_exo(s * c, s * c);
    e_exo << kron_identity(MatrixXd::Ones(s, 1), c), d1 * nc;
    MatrixXd y_exo = MatrixXd::Zero(s * c, s * c), x_exo = MatrixXd::Zero(n, s * c);
    y_exo.rightCols(c) = d21 * nc;
    x_exo.rightCols(c) = b1 * nc;

    // Mirror factorization: w = (I - m D1)^{-1} m (C1 x + e_exo d + D12 u).
    VectorXd drive = c1 * x + e_exo * d + d12 * u;
    VectorXd w = (MatrixXd::Identity(s * c, s * c) - mm * d1).lu().solve(mm * drive);
    VectorXd xp = a * x + x_exo * d + b1 * w + b2 * u;
    VectorXd e = drive + d1 * w;
    VectorXd y = c2 * x + y_exo * d + d21 * w + d2 * u;

    CHECK((mc.a * x + mc.b_exo * d + mc.b2 * u - xp).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((mc.c_e * x + mc.d_e_exo * d + mc.d_e2 * u - e).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((mc.c_y * x + mc.d_y_exo * d + mc.d_y2 * u - y).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("quadratic closure equals one executor sweep") {
  std::mt19937_64 rng(7);
  StateSpace g = three_operator_splitting(0.8, 0.6, 2);
  VectorXd m(3);
  m << 0.7, 0.3, 1.2;
  MatrixXd a_cl = close_quadratic(g, m, 2);

  std::vector<BlockOracle> oracles;
  for (int i = 0; i < 3; ++i) {
    TestQuadratic tq;
    tq.m = m(i);
    tq.b = VectorXd::Zero(2);
    oracles.push_back(tq);
  }
  OracleClass cls = make_oracle_class((VectorXd(3) << 0.1, 0.1, 0.1).finished(),
                                      (VectorXd(3) << 2, 2, 2).finished(), 2);
  AlgorithmSystem alg = make_algorithm(g, oracles, cls);
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd x0 = random_matrix(rng, g.n(), 1);
    SimulateOptions opts;
    opts.steps = 1;
    Trajectory traj = simulate(alg, x0, opts);
    CHECK((traj.x.row(1).transpose() - a_cl * x0).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("assumption audit over the memoryless exchange") {
  PartitionedPlant p = make_direct_plant(2, 1);
  MatrixXd n = default_consensus(2, 1);

  VectorXd m_pos(2);
  m_pos << 1.0, 0.5;
  AssumptionReport pos = check_assumptions(p, m_pos, n);
  CHECK(pos.all());

  VectorXd m_zero(2);
  m_zero << 1.0, -1.0;
  AssumptionReport zero = check_assumptions(p, m_zero, n);
  CHECK_FALSE(zero.mean_nonzero);
  CHECK_FALSE(zero.composite_detectable);
}

TEST_CASE("assumption audit passes on the mixed-stability network") {
  PartitionedPlant p = mixed_stability_network();
  VectorXd m(2);
  m << 1.0, 0.0;
  AssumptionReport rep = check_assumptions(p, m, default_consensus(2, 1));
  CHECK(rep.mean_nonzero);
  CHECK(rep.loop_invertible);
  CHECK(rep.stabilizable);
  CHECK(rep.detectable);
  CHECK(rep.regulator_rank);
  CHECK(rep.composite_detectable);
}

TEST_CASE("delay exchange admits a regulator solution") {
  PartitionedPlant p = make_delay_network(1, 1, 1);
  RegulatorSolution sol = solve_plant_regulator(p, default_consensus(2, 1));
  CHECK(sol.residual < 1e-10);
  AssumptionReport rep = check_assumptions(p, (VectorXd(2) << 1, 0).finished(),
                                           default_consensus(2, 1));
  CHECK(rep.all());
}

TEST_CASE("controller order bound") {
  const int c = 2, s = 3;
  // Every oracle unbounded over a memoryless exchange with a block-triangular
  // information pattern: the bound is (t - 1) c.
  PartitionedPlant p = make_direct_plant(s, c);
  RegulatorSolution sol = solve_plant_regulator(p, default_consensus(s, c));
  OracleClass cls = make_oracle_class(VectorXd::Zero(s),
                                      VectorXd::Constant(s, kInf), c);
  CHECK(blt_info_rank(cls) == s * c);
  CHECK(order_bound(sol.gamma, sol.phi, blt_info_rank(cls), s * c) == (s - 1) * c);

  // Single block: no state needed.
  PartitionedPlant p1 = make_direct_plant(1, c);
  RegulatorSolution sol1 = solve_plant_regulator(p1, default_consensus(1, c));
  OracleClass cls1 = make_oracle_class(VectorXd::Zero(1),
                                       VectorXd::Constant(1, kInf), c);
  CHECK(order_bound(sol1.gamma, sol1.phi, blt_info_rank(cls1), c) == 0);

  OracleClass mixed = make_oracle_class(
      VectorXd::Zero(2), (VectorXd(2) << 5.0, kInf).finished(), 3);
  CHECK(blt_info_rank(mixed) == 3);

  // Channel solution: rank arithmetic gives a vacuous bound.
  PartitionedPlant ch = make_channel_plant(0.5, 3, 1);
  RegulatorSolution chs = solve_plant_regulator(ch, default_consensus(2, 1));
  CHECK(order_bound(chs.gamma, chs.phi, 1, 2) == 0);
}

TEST_CASE("fixed-point encoding containments") {
  // Gradient descent base: one state, one block.
  MatrixXd one(1, 1), neg(1, 1);
  one << 1;
  neg << -0.5;
  StateSpace gd = make_state_space(one, neg, one, MatrixXd::Zero(1, 1));
  EncodingReport gd_rep = check_fixed_point_encoding(KroneckerSystem{gd, 3},
                                                     MatrixXd(1, 0));
  CHECK(gd_rep.range_ok);
  CHECK(gd_rep.null_ok);

  // Two-block splitting base satisfying the exchange regulator equation.
  const double gamma = 0.9, lam = 0.6;
  MatrixXd a(1, 1), b(1, 2), c(2, 1), d(2, 2);
  a << 1;
  b << -gamma * lam, -gamma * lam;
  c << 1, 1;
  d << -gamma, 0, -2 * gamma, -gamma;
  StateSpace dr = make_state_space(a, b, c, d);
  MatrixXd n2(2, 1);
  n2 << 1, -1;
  EncodingReport dr_rep = check_fixed_point_encoding(KroneckerSystem{dr, 2}, n2);
  CHECK(dr_rep.range_ok);
  CHECK(dr_rep.null_ok);

  // Breaking the regulator equation breaks the range containment.
  StateSpace bad = make_state_space(0.5 * one, neg, one, MatrixXd::Zero(1, 1));
  MatrixXd n1(1, 0);
  EncodingReport bad_rep = check_fixed_point_encoding(KroneckerSystem{bad, 1}, n1);
  CHECK_FALSE(bad_rep.range_ok);
}

TEST_CASE("closed-loop regulation verdict") {
  // Trivial loop: no dynamics, no defect response.
  StateSpace still = make_state_space(MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1),
                                      MatrixXd::Zero(1, 1), MatrixXd::Zero(1, 1));
  RegulationCheck ok = nominal_regulation_check(still);
  CHECK(ok.regulated);
  CHECK(max_abs(ok.upsilon) == 0.0);

  // Stable loop with nonvanishing steady error.
  MatrixXd half(1, 1), one(1, 1);
  half << 0.5;
  one << 1;
  RegulationCheck leak = nominal_regulation_check(make_state_space(half, one, one,
                                                                   MatrixXd::Zero(1, 1)));
  CHECK(leak.schur);
  CHECK_FALSE(leak.regulated);

  // Channel loop: plant closed with the regulating controller wipes out the
  // defect in the error channel.
  PartitionedPlant p = make_channel_plant(0.5, 3, 1);
  MatrixXd nc = default_consensus(2, 1);
  VectorXd m(2);
  m << 1.0, 0.0;
  MeanClosure mc = close_plant_mean(p, m, nc);
  const double b0 = -0.04, b1 = -0.2, b2 = -0.1, beta = 0.125;
  MatrixXd ac(1, 1), bc(1, 2), cc(2, 1), dc(2, 2);
  ac << 1;
  bc << beta * b0, b0;
  cc << 1, 1;
  dc << beta * b2, 0, beta * (b1 + b2), b1;
  StateSpace k = make_state_space(ac, bc, cc, dc);

  // Mean-closed plant as a [d; u] -> [e; y] system, then close u = K y.
  const int n = mc.a.rows(), sc = 2, ny = 2, nu = 2;
  MatrixXd pb(n, sc + nu), pc(sc + ny, n), pd(sc + ny, sc + nu);
  pb << mc.b_exo, mc.b2;
  pc << mc.c_e, mc.c_y;
  pd << mc.d_e_exo, mc.d_e2, mc.d_y_exo, mc.d_y2;
  StateSpace open = make_state_space(mc.a, pb, pc, pd);
  StateSpace closed = star(open, nu, ny, k);
  RegulationCheck verdict = nominal_regulation_check(closed, 1e-7);
  CHECK(verdict.schur);
  CHECK(verdict.regulated);
}
