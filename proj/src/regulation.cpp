#include "algoforge/regulation.hpp"

#include <cmath>
#include <stdexcept>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

MatrixXd ones_stack(int s, int c) {
  MatrixXd v = MatrixXd::Ones(s, 1);
  return kron_identity(v, c);
}

MatrixXd mean_diag(const VectorXd& m, int c) {
  MatrixXd d = MatrixXd::Zero(m.size() * c, m.size() * c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    d.block(i * c, i * c, c, c) = m(i) * MatrixXd::Identity(c, c);
  return d;
}

}  // namespace

MatrixXd default_consensus(int s, int c) {
  require(s >= 1, "consensus directions need at least one block");
  if (s == 1) return MatrixXd(c, 0);
  MatrixXd n(s, s - 1);
  n << MatrixXd::Identity(s - 1, s - 1), -MatrixXd::Ones(1, s - 1);
  return kron_identity(n, c);
}

void validate_consensus(const MatrixXd& n_cons, int s, int c) {
  require(n_cons.rows() == s * c && n_cons.cols() == (s - 1) * c,
          "consensus matrix must be s*c x (s-1)*c");
  const MatrixXd colsum = ones_stack(s, c).transpose() * n_cons;
  if (max_abs(colsum) > 1e-12 * (1.0 + max_abs(n_cons)))
    throw std::invalid_argument("consensus columns must sum to zero");
  if (rank_svd(n_cons) < (s - 1) * c)
    throw std::invalid_argument("consensus matrix must have full column rank");
}

RegulatorSolution solve_plant_regulator(const PartitionedPlant& p,
                                        const MatrixXd& n_cons) {
  validate_consensus(n_cons, p.s, p.c);
  const int n = p.n(), sc = p.zw(), nu = p.nu(), c = p.c;
  MatrixXd lhs(n + sc, n + nu);
  lhs << p.a - MatrixXd::Identity(n, n), p.b2, p.c1, p.d12;
  MatrixXd rhs = MatrixXd::Zero(n + sc, sc);
  rhs.block(0, c, n, sc - c) = -p.b1 * n_cons;
  rhs.block(n, 0, sc, c) = -ones_stack(p.s, c);
  rhs.block(n, c, sc, sc - c) -= p.d1 * n_cons;

  const MatrixXd sol = pinv(lhs) * rhs;
  const double scale = 1.0 + std::max(max_abs(rhs), max_abs(lhs));
  const double residual = max_abs(lhs * sol - rhs);
  if (residual > 1e-7 * scale)
    throw Infeasible("plant regulator equations have no solution", residual);

  RegulatorSolution out;
  out.pi = sol.topRows(n);
  out.gamma = sol.bottomRows(nu);
  out.residual = residual;
  out.phi = p.c2 * out.pi + p.d2 * out.gamma;
  out.phi.rightCols(sc - c) += p.d21 * n_cons;
  return out;
}

ControllerRegulator solve_controller_regulator(const StateSpace& k, const MatrixXd& phi,
                                               const MatrixXd& gamma) {
  require(k.inputs() == phi.rows(), "controller inputs must match Phi rows");
  require(k.outputs() == gamma.rows(), "controller outputs must match Gamma rows");
  require(phi.cols() == gamma.cols(), "Phi and Gamma must share the defect width");
  const int nc = k.n();
  MatrixXd lhs(nc + k.outputs(), nc);
  lhs << k.a - MatrixXd::Identity(nc, nc), k.c;
  MatrixXd rhs(nc + k.outputs(), phi.cols());
  rhs << -k.b * phi, gamma - k.d * phi;
  const MatrixXd theta = pinv(lhs) * rhs;
  const double scale = 1.0 + std::max(max_abs(rhs), max_abs(lhs));
  const double residual = max_abs(lhs * theta - rhs);
  if (residual > 1e-8 * scale)
    throw Infeasible("controller regulator equations have no solution", residual);
  return ControllerRegulator{theta, residual};
}

RegulatorSolution rebase_consensus(const RegulatorSolution& sol, const MatrixXd& w,
                                   int c) {
  const int dis = static_cast<int>(sol.pi.cols()) - c;
  require(w.rows() == dis && w.cols() == dis, "rebase matrix must act on disagreements");
  MatrixXd what = MatrixXd::Zero(c + dis, c + dis);
  what.topLeftCorner(c, c) = MatrixXd::Identity(c, c);
  what.bottomRightCorner(dis, dis) = w;
  RegulatorSolution out;
  out.pi = sol.pi * what;
  out.gamma = sol.gamma * what;
  out.phi = sol.phi * what;
  out.residual = sol.residual;
  return out;
}

MatrixXd close_quadratic(const StateSpace& g, const VectorXd& m, int c) {
  require(g.inputs() == m.size() * c && g.outputs() == m.size() * c,
          "slope vector must match the oracle channel");
  const MatrixXd mm = mean_diag(m, c);
  const MatrixXd loop = MatrixXd::Identity(g.inputs(), g.inputs()) - mm * g.d;
  if (cond_2(loop) >= 1e12)
    throw IllPosed("mean closure loop is numerically singular");
  return g.a + g.b * Eigen::PartialPivLU<MatrixXd>(loop).solve(mm * g.c);
}

MeanClosure close_plant_mean(const PartitionedPlant& p, const VectorXd& m,
                             const MatrixXd& n_cons) {
  validate_consensus(n_cons, p.s, p.c);
  require(m.size() == p.s, "one slope per block is required");
  const int n = p.n(), sc = p.zw(), c = p.c;
  const MatrixXd mm = mean_diag(m, c);
  const MatrixXd loop = MatrixXd::Identity(sc, sc) - p.d1 * mm;
  if (cond_2(loop) >= 1e12)
    throw IllPosed("mean closure loop is numerically singular");
  Eigen::PartialPivLU<MatrixXd> lu(loop);

  // Exogenous feedthrough of the open plant rows: [1_s (x) I_c, D1 N] on the
  // error row, [0, D21 N] on the measurement row, [0, B1 N] on the state row.
  MatrixXd e_exo(sc, sc), y_exo(p.ny(), sc), x_exo(n, sc);
  e_exo << ones_stack(p.s, c), p.d1 * n_cons;
  y_exo.setZero();
  y_exo.rightCols(sc - c) = p.d21 * n_cons;
  x_exo.setZero();
  x_exo.rightCols(sc - c) = p.b1 * n_cons;

  // w = m (I - D1 m)^-1 applied to the z-row data closes the loop.
  const MatrixXd zc = lu.solve(p.c1);
  const MatrixXd zexo = lu.solve(e_exo);
  const MatrixXd z2 = lu.solve(p.d12);

  MeanClosure out;
  out.a = p.a + p.b1 * mm * zc;
  out.b_exo = x_exo + p.b1 * mm * zexo;
  out.b2 = p.b2 + p.b1 * mm * z2;
  out.c_e = zc;
  out.d_e_exo = zexo;
  out.d_e2 = z2;
  out.c_y = p.c2 + p.d21 * mm * zc;
  out.d_y_exo = y_exo + p.d21 * mm * zexo;
  out.d_y2 = p.d2 + p.d21 * mm * z2;
  return out;
}

AssumptionReport check_assumptions(const PartitionedPlant& p, const VectorXd& m,
                                   const MatrixXd& n_cons) {
  AssumptionReport rep;
  rep.mean_nonzero = std::abs(m.sum()) > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
  const MatrixXd mm = mean_diag(m, p.c);
  rep.loop_invertible =
      cond_2(MatrixXd::Identity(p.zw(), p.zw()) - p.d1 * mm) < 1e12;
  if (!rep.loop_invertible) return rep;

  const MeanClosure cl = close_plant_mean(p, m, n_cons);
  rep.stabilizable = pbh_stabilizable(cl.a, cl.b2);
  rep.detectable = pbh_detectable(cl.a, cl.c_y);

  MatrixXd reg(p.n() + p.zw(), p.n() + p.nu());
  reg << p.a - MatrixXd::Identity(p.n(), p.n()), p.b2, p.c1, p.d12;
  rep.regulator_rank = rank_svd(reg) == p.n() + p.nu();

  // Defect-augmented pair: the constant defect direction must remain observable
  // through the measurements.
  const int n = p.n(), sc = p.zw();
  MatrixXd aug_a = MatrixXd::Zero(n + sc, n + sc);
  aug_a.topLeftCorner(n, n) = cl.a;
  aug_a.topRightCorner(n, sc) = cl.b_exo;
  aug_a.bottomRightCorner(sc, sc) = MatrixXd::Identity(sc, sc);
  MatrixXd aug_c(p.ny(), n + sc);
  aug_c << cl.c_y, cl.d_y_exo;
  rep.composite_detectable = pbh_detectable(aug_a, aug_c);
  return rep;
}

PartitionedPlant make_direct_plant(int s, int c) {
  const int sc = s * c;
  return make_partitioned_plant(
      MatrixXd::Zero(0, 0), MatrixXd::Zero(0, sc), MatrixXd::Zero(0, sc),
      MatrixXd::Zero(sc, 0), MatrixXd::Zero(sc, sc), MatrixXd::Identity(sc, sc),
      MatrixXd::Zero(sc, 0), MatrixXd::Identity(sc, sc), MatrixXd::Zero(sc, sc), s, c);
}

PartitionedPlant make_channel_plant(double alpha, int h, int c) {
  require(h >= 0, "delays must be nonnegative");
  if (h == 0) return make_direct_plant(2, c);
  MatrixXd a = MatrixXd::Zero(h, h);
  for (int i = 0; i < h; ++i) {
    a(i, i) = alpha;
    if (i + 1 < h) a(i + 1, i) = 1.0;
  }
  MatrixXd b1 = MatrixXd::Zero(h, 2);
  b1(0, 0) = 1.0;
  MatrixXd c2 = MatrixXd::Zero(2, h);
  c2(0, h - 1) = 1.0;
  MatrixXd d21 = MatrixXd::Zero(2, 2);
  d21(1, 1) = 1.0;
  return make_partitioned_plant(
      kron_identity(a, c), kron_identity(b1, c), MatrixXd::Zero(h * c, 2 * c),
      MatrixXd::Zero(2 * c, h * c), MatrixXd::Zero(2 * c, 2 * c),
      MatrixXd::Identity(2 * c, 2 * c), kron_identity(c2, c), kron_identity(d21, c),
      MatrixXd::Zero(2 * c, 2 * c), 2, c);
}

PartitionedPlant make_delay_network(int h_z, int h_w, int c) {
  require(h_z >= 0 && h_w >= 0, "delays must be nonnegative");
  const int n = h_w + h_z;
  MatrixXd a = MatrixXd::Zero(n, n);
  for (int i = 1; i < h_w; ++i) a(i, i - 1) = 1.0;
  for (int i = 1; i < h_z; ++i) a(h_w + i, h_w + i - 1) = 1.0;
  MatrixXd b1 = MatrixXd::Zero(n, 2), b2 = MatrixXd::Zero(n, 2);
  if (h_z > 0) b1(h_w, 0) = 1.0;
  if (h_w > 0) b2(0, 0) = 1.0;
  MatrixXd c1 = MatrixXd::Zero(2, n), c2 = MatrixXd::Zero(2, n);
  MatrixXd d12 = MatrixXd::Zero(2, 2), d21 = MatrixXd::Zero(2, 2);
  if (h_w > 0)
    c1(0, h_w - 1) = 1.0;
  else
    d12(0, 0) = 1.0;
  d12(1, 1) = 1.0;
  if (h_z > 0)
    c2(0, n - 1) = 1.0;
  else
    d21(0, 0) = 1.0;
  d21(1, 1) = 1.0;
  return make_partitioned_plant(
      kron_identity(a, c), kron_identity(b1, c), kron_identity(b2, c),
      kron_identity(c1, c), MatrixXd::Zero(2 * c, 2 * c), kron_identity(d12, c),
      kron_identity(c2, c), kron_identity(d21, c), MatrixXd::Zero(2 * c, 2 * c), 2, c);
}

int order_bound(const MatrixXd& gamma, const MatrixXd& phi, int r_info, int n_y) {
  const int cols = static_cast<int>(gamma.cols());
  const int r_gamma = cols - rank_svd(gamma);
  MatrixXd stack(gamma.rows() + phi.rows(), cols);
  stack << phi, gamma;
  const int r_both = cols - rank_svd(stack);
  return std::max(0, r_info + r_gamma - r_both - n_y);
}

int blt_info_rank(const OracleClass& cls) {
  int t = 0;
  for (Eigen::Index i = 0; i < cls.L.size(); ++i)
    if (std::isinf(cls.L(i))) ++t;
  return t * cls.c;
}

EncodingReport check_fixed_point_encoding(const KroneckerSystem& k, const MatrixXd& n_base) {
  const StateSpace& g = k.base;
  const int s = static_cast<int>(g.outputs());
  require(g.inputs() == s, "controller base must be square");
  require(n_base.rows() == s && n_base.cols() == s - 1, "disagreement basis shape");
  const Eigen::Index n = g.n();

  MatrixXd lhs = MatrixXd::Zero(n + s, s);
  lhs.topLeftCorner(n, s - 1) = g.b * n_base;
  lhs.block(n, 0, s, s - 1) = g.d * n_base;
  lhs.bottomRightCorner(s, 1) = -VectorXd::Ones(s);
  MatrixXd target(n + s, n);
  target << MatrixXd::Identity(n, n) - g.a, -g.c;

  MatrixXd pencil(n, n + s);
  pencil << g.a - MatrixXd::Identity(n, n), g.b;
  MatrixXd sink = MatrixXd::Zero(s, n + s);
  sink.topLeftCorner(s - 1, n) = n_base.transpose() * g.c;
  sink.block(0, n, s - 1, s) = n_base.transpose() * g.d;
  sink.bottomRightCorner(1, s) = VectorXd::Ones(s).transpose();

  EncodingReport rep;
  rep.range_ok = range_contains(target, lhs, 1e-8);
  MatrixXd null_pencil = nullspace_basis(pencil);
  rep.null_ok = null_pencil.cols() == 0 ||
                max_abs(sink * null_pencil) <= 1e-8 * (1.0 + max_abs(sink));
  return rep;
}

RegulationCheck nominal_regulation_check(const StateSpace& g, double tol) {
  RegulationCheck out;
  out.schur = is_schur(g.a, 1e-9);
  if (!out.schur) return out;
  const Eigen::Index n = g.n();
  out.upsilon = (MatrixXd::Identity(n, n) - g.a).lu().solve(g.b);
  out.residual = max_abs(g.c * out.upsilon + g.d);
  out.regulated = out.residual <= tol * (1.0 + max_abs(g.d) + max_abs(g.c));
  return out;
}

}  // namespace algoforge
