#include "algoforge/executor.hpp"

#include <cmath>
#include <stdexcept>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

AlgorithmSystem make_algorithm(StateSpace g, std::vector<BlockOracle> oracles,
                               OracleClass cls) {
  const int sc = cls.s() * cls.c;
  require(static_cast<int>(oracles.size()) == cls.s(),
          "one oracle per class block is required");
  require(g.inputs() == sc && g.outputs() == sc,
          "linear part must have s*c inputs and outputs");
  if (!is_block_lower_triangular(g.d, cls.s(), cls.c))
    throw IllPosed("feedthrough must be block lower triangular for sequential evaluation");
  return AlgorithmSystem{std::move(g), std::move(oracles), std::move(cls)};
}

bool is_block_lower_triangular(const MatrixXd& d, int s, int c, double tol) {
  const double scale = 1.0 + max_abs(d);
  for (int i = 0; i < s; ++i)
    for (int j = i + 1; j < s; ++j)
      if (max_abs(d.block(i * c, j * c, c, c)) > tol * scale) return false;
  return true;
}

WellPosedReport check_well_posed(const AlgorithmSystem& alg) {
  WellPosedReport rep;
  const int c = alg.c();
  for (int i = 0; i < alg.s(); ++i) {
    const MatrixXd dii = alg.g.d.block(i * c, i * c, c, c);
    const bool ok = std::holds_alternative<ZeroOracle>(alg.oracles[i])
                        ? true
                        : yosida_well_posed(alg.cls.m(i), alg.cls.L(i), dii);
    rep.blocks.push_back(ok);
    rep.all = rep.all && ok;
  }
  return rep;
}

namespace {

// One forward-substitution sweep: fills w and z for the given state.
void sweep(const AlgorithmSystem& alg, const VectorXd& x, VectorXd& w, VectorXd& z) {
  const int c = alg.c();
  const VectorXd cx = alg.g.c * x;
  for (int i = 0; i < alg.s(); ++i) {
    VectorXd vi = cx.segment(i * c, c);
    for (int j = 0; j < i; ++j)
      vi += alg.g.d.block(i * c, j * c, c, c) * w.segment(j * c, c);
    const MatrixXd dii = alg.g.d.block(i * c, i * c, c, c);
    w.segment(i * c, c) = eval_yosida(alg.oracles[i], dii, vi);
    z.segment(i * c, c) = vi + dii * w.segment(i * c, c);
  }
}

}  // namespace

Trajectory simulate(const AlgorithmSystem& alg, const VectorXd& x0,
                    const SimulateOptions& opts) {
  require(x0.size() == alg.g.n(), "initial state has the wrong dimension");
  require(opts.steps >= 1, "need at least one step");
  const int sc = alg.s() * alg.c();
  Trajectory traj;
  traj.x.resize(opts.steps + 1, alg.g.n());
  traj.w.resize(opts.steps, sc);
  traj.z.resize(opts.steps, sc);
  VectorXd x = x0, w(sc), z(sc);
  traj.x.row(0) = x.transpose();
  for (int k = 0; k < opts.steps; ++k) {
    sweep(alg, x, w, z);
    traj.w.row(k) = w.transpose();
    traj.z.row(k) = z.transpose();
    x = alg.g.a * x + alg.g.b * w;
    traj.x.row(k + 1) = x.transpose();
    const double norm = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(norm) || norm > opts.divergence_threshold) {
      traj.diverged = true;
      traj.x.conservativeResize(k + 2, Eigen::NoChange);
      traj.w.conservativeResize(k + 1, Eigen::NoChange);
      traj.z.conservativeResize(k + 1, Eigen::NoChange);
      break;
    }
  }
  return traj;
}

FixedPoint solve_fixed_point_quadratic(const AlgorithmSystem& alg) {
  const int n = alg.g.n(), c = alg.c(), sc = alg.s() * c;
  MatrixXd slope = MatrixXd::Zero(sc, sc);
  VectorXd offset = VectorXd::Zero(sc);
  for (int i = 0; i < alg.s(); ++i) {
    if (const auto* q = std::get_if<GeneralQuadratic>(&alg.oracles[i])) {
      slope.block(i * c, i * c, c, c) = q->q;
      offset.segment(i * c, c) = -q->q * q->beta0;
    } else if (const auto* t = std::get_if<TestQuadratic>(&alg.oracles[i])) {
      slope.block(i * c, i * c, c, c) = t->m * MatrixXd::Identity(c, c);
      offset.segment(i * c, c) = t->b;
    } else if (!std::holds_alternative<ZeroOracle>(alg.oracles[i])) {
      throw std::invalid_argument("fixed-point algebra needs quadratic or zero blocks");
    }
  }
  // x = A x + B w and w = slope (C x + D w) + offset.
  MatrixXd lhs(n + sc, n + sc);
  lhs << MatrixXd::Identity(n, n) - alg.g.a, -alg.g.b, -slope * alg.g.c,
      MatrixXd::Identity(sc, sc) - slope * alg.g.d;
  VectorXd rhs(n + sc);
  rhs << VectorXd::Zero(n), offset;
  Eigen::FullPivLU<MatrixXd> lu(lhs);
  if (!lu.isInvertible())
    throw SingularFixedPointSystem("fixed-point system is singular");
  const VectorXd sol = lu.solve(rhs);
  const double resid = (lhs * sol - rhs).cwiseAbs().maxCoeff();
  if (resid > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff()))
    throw SingularFixedPointSystem("fixed-point system is numerically unreliable");
  FixedPoint fp;
  fp.x = sol.head(n);
  fp.w = sol.tail(sc);
  fp.z = alg.g.c * fp.x + alg.g.d * fp.w;
  return fp;
}

double fixed_point_residual(const AlgorithmSystem& alg, const VectorXd& x,
                            const VectorXd& w) {
  const int sc = alg.s() * alg.c();
  VectorXd w2(sc), z2(sc);
  sweep(alg, x, w2, z2);
  const double state_defect = alg.g.n()
                                  ? (alg.g.a * x + alg.g.b * w - x).cwiseAbs().maxCoeff()
                                  : 0.0;
  return std::max(state_defect, (w2 - w).cwiseAbs().maxCoeff());
}

double measure_rate(const Trajectory& traj, const VectorXd& x_star) {
  if (traj.diverged) throw NonConvergent("trajectory diverged");
  const int total = static_cast<int>(traj.x.rows());
  require(x_star.size() == traj.x.cols(), "fixed point has the wrong dimension");
  const double floor = 1e-13 * (1.0 + x_star.cwiseAbs().maxCoeff());
  std::vector<std::pair<double, double>> pts;
  for (int k = total / 2; k < total; ++k) {
    const double e = (traj.x.row(k).transpose() - x_star).norm();
    if (e > floor) pts.push_back({static_cast<double>(k), std::log(e)});
  }
  if (pts.size() < 3) return 0.0;  // converged below resolution
  const double e_first = (traj.x.row(0).transpose() - x_star).norm();
  const double e_last = (traj.x.row(total - 1).transpose() - x_star).norm();
  if (e_last >= e_first && e_first > floor)
    throw NonConvergent("no contraction toward the fixed point");
  double sk = 0, sy = 0, skk = 0, sky = 0;
  for (auto& [k, y] : pts) {
    sk += k;
    sy += y;
    skk += k * k;
    sky += k * y;
  }
  const double nn = static_cast<double>(pts.size());
  const double slope = (nn * sky - sk * sy) / (nn * skk - sk * sk);
  return std::exp(slope);
}

ErrorSignals error_signals(const Trajectory& traj, const VectorXd& beta_star,
                           const VectorXd& w_star) {
  const int sc = static_cast<int>(traj.z.cols());
  require(sc % beta_star.size() == 0, "consensus target must divide the output width");
  const int s = sc / static_cast<int>(beta_star.size());
  VectorXd stacked(sc);
  for (int i = 0; i < s; ++i) stacked.segment(i * beta_star.size(), beta_star.size()) = beta_star;
  ErrorSignals sig;
  sig.z_err = traj.z.rowwise() - stacked.transpose();
  sig.w_err = traj.w.rowwise() - w_star.transpose();
  return sig;
}

AlgorithmSystem permute_blocks(const AlgorithmSystem& alg, const std::vector<int>& perm) {
  const int s = alg.s(), c = alg.c();
  require(static_cast<int>(perm.size()) == s, "permutation size mismatch");
  MatrixXd p = MatrixXd::Zero(s * c, s * c);
  for (int i = 0; i < s; ++i)
    p.block(i * c, perm[i] * c, c, c) = MatrixXd::Identity(c, c);
  StateSpace g{alg.g.a, alg.g.b * p.transpose(), p * alg.g.c, p * alg.g.d * p.transpose()};
  std::vector<BlockOracle> oracles(s);
  VectorXd m(s), L(s);
  for (int i = 0; i < s; ++i) {
    oracles[i] = alg.oracles[perm[i]];
    m(i) = alg.cls.m(perm[i]);
    L(i) = alg.cls.L(perm[i]);
  }
  return make_algorithm(std::move(g), std::move(oracles),
                        make_oracle_class(std::move(m), std::move(L), c));
}

}  // namespace algoforge
