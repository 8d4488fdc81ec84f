#include "algoforge/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Flip columns so the largest-magnitude entry is positive; orthonormal bases
// are only defined up to sign and downstream comparisons want a fixed
// representative.
MatrixXd canonical_columns(MatrixXd m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index imax = 0;
    m.col(j).cwiseAbs().maxCoeff(&imax);
    if (m(imax, j) < 0) m.col(j) = -m.col(j);
  }
  return m;
}

// Deterministic orthonormal basis of the range of a projector. Pivoted QR
// reproduces coordinate directions exactly whenever the subspace is
// axis-aligned, which keeps the common interconnections human-readable.
MatrixXd projector_basis(const MatrixXd& proj, int k) {
  if (k == 0) return MatrixXd(proj.rows(), 0);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(proj);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(proj.rows(), k);
  return canonical_columns(q);
}

}  // namespace

DefectBasis defect_basis(const MatrixXd& phi) {
  const int sc = static_cast<int>(phi.cols());
  DefectBasis out;
  MatrixXd kernel = nullspace_basis(phi);
  out.r = static_cast<int>(kernel.cols());
  const MatrixXd proj = kernel * kernel.transpose();
  out.r_basis = MatrixXd(sc, sc);
  out.r_basis.leftCols(out.r) = projector_basis(proj, out.r);
  out.r_basis.rightCols(sc - out.r) =
      projector_basis(MatrixXd::Identity(sc, sc) - proj, sc - out.r);
  return out;
}

FactorizationResult factorize(const StateSpace& k, const MatrixXd& theta,
                              const MatrixXd& gamma, const MatrixXd& phi) {
  const int nc = static_cast<int>(k.n());
  const int nu = static_cast<int>(k.outputs());
  const int sc = static_cast<int>(phi.cols());
  require(theta.rows() == nc && theta.cols() == sc, "theta must be n_c x sc");
  require(gamma.rows() == nu && gamma.cols() == sc, "gamma must be n_u x sc");
  require(k.inputs() == phi.rows(), "controller inputs must match phi rows");

  if (!is_controllable(k.a, k.b) || !is_observable(k.a, k.c))
    throw NotMinimal("controller realization is not minimal");

  const DefectBasis basis = defect_basis(phi);
  const int r = basis.r;
  const MatrixXd r1 = basis.r_basis.leftCols(r);
  const MatrixXd r2 = basis.r_basis.rightCols(sc - r);

  const MatrixXd theta1 = theta * r1;
  if (rank_svd(theta1) < r)
    throw RankDeficientTheta1("defect injection loses rank; regulator data invalid");

  MatrixXd q(nc, nc);
  q.leftCols(r) = -theta1;
  q.rightCols(nc - r) = orthogonal_complement(range_basis(theta1), nc);
  Eigen::FullPivLU<MatrixXd> qlu(q);

  const MatrixXd a_q = qlu.solve(k.a * q);
  const MatrixXd b_q = qlu.solve(k.b);
  const MatrixXd c_q = k.c * q;
  const MatrixXd gamma1 = gamma * r1;

  const double scale = 1.0 + std::max({max_abs(k.a), max_abs(k.c), max_abs(gamma)});
  double defect = std::max(
      max_abs(a_q.topLeftCorner(r, r) - MatrixXd::Identity(r, r)),
      max_abs(a_q.bottomLeftCorner(nc - r, r)));
  defect = std::max(defect, max_abs(c_q.leftCols(r) + gamma1));
  if (defect > 1e-8 * scale)
    throw NotMinimal("controller does not carry the integrator structure; "
                     "check the regulator solution");

  FactorizationResult out;
  out.r = r;
  out.r_basis = basis.r_basis;
  out.q_basis = q;
  out.gamma1 = gamma1;
  out.gamma2 = gamma * r2;
  out.phi2 = phi * r2;

  const MatrixXd theta_q = qlu.solve(theta * r2);
  out.theta12 = theta_q.topRows(r);
  out.theta22 = theta_q.bottomRows(nc - r);

  MatrixXd core_c(r + nu, nc - r), core_d(r + nu, k.inputs());
  core_c << a_q.topRightCorner(r, nc - r), c_q.rightCols(nc - r);
  core_d << b_q.topRows(r), k.d;
  out.sigma_core = make_state_space(a_q.bottomRightCorner(nc - r, nc - r),
                                    b_q.bottomRows(nc - r), core_c, core_d);

  MatrixXd min_b = MatrixXd::Zero(r, r + nu);
  min_b.leftCols(r) = MatrixXd::Identity(r, r);
  MatrixXd min_d = MatrixXd::Zero(nu, r + nu);
  min_d.rightCols(nu) = MatrixXd::Identity(nu, nu);
  out.sigma_min = make_state_space(MatrixXd::Identity(r, r), min_b, -gamma1, min_d);
  return out;
}

double core_constraint_residual(const StateSpace& core, int r,
                                const MatrixXd& theta12, const MatrixXd& theta22,
                                const MatrixXd& gamma1, const MatrixXd& gamma2,
                                const MatrixXd& phi2) {
  const MatrixXd drive = core.c.topRows(r) * theta22 + core.d.topRows(r) * phi2;
  const MatrixXd hold = core.a * theta22 + core.b * phi2 - theta22;
  const MatrixXd control = core.c.bottomRows(core.outputs() - r) * theta22 +
                           core.d.bottomRows(core.outputs() - r) * phi2 -
                           (gamma1 * theta12 + gamma2);
  return std::max({max_abs(drive), max_abs(hold), max_abs(control)});
}

StateSpace static_core_build(const StaticCoreParams& p, int s, int c,
                             bool lower_triangular) {
  require(s >= 1 && c >= 1, "block counts must be positive");
  require(p.b1.size() == s && p.b2.size() == s, "profiles must have one entry per block");
  if (lower_triangular) {
    for (int i = 0; i + 1 < s; ++i)
      require(p.b1(i) == 0.0, "triangular profile fixes all but the last b1 entry");
    for (int i = 1; i < s; ++i)
      require(p.b2(i) == 0.0, "triangular profile fixes all but the first b2 entry");
  }
  const MatrixXd ones = MatrixXd::Ones(s, 1);
  const MatrixXd d_base = p.b1 * ones.transpose() + ones * p.b2.transpose();
  return make_state_space(MatrixXd::Identity(c, c),
                          kron_identity(p.b0 * ones.transpose(), c),
                          kron_identity(ones, c), kron_identity(d_base, c));
}

MatrixXd static_core_theta12(const StaticCoreParams& p, int s, int c) {
  if (s == 1) return MatrixXd(c, 0);
  MatrixXd n_base(s, s - 1);
  n_base << MatrixXd::Identity(s - 1, s - 1), -MatrixXd::Ones(1, s - 1);
  return kron_identity(-p.b2.transpose() * n_base, c);
}

StaticCoreParams static_core_identify(const KroneckerSystem& g) {
  const StateSpace& base = g.base;
  const int s = static_cast<int>(base.outputs());
  if (base.n() != 1 || base.inputs() != s)
    throw NotInFamily("wrong base dimensions", 0.0);

  const double scale = 1.0 + std::max({max_abs(base.b), max_abs(base.c),
                                       max_abs(base.d)});
  const double tol = 1e-9 * scale;
  if (std::abs(base.a(0, 0) - 1.0) > tol)
    throw NotInFamily("state is not a passthrough accumulator",
                      std::abs(base.a(0, 0) - 1.0));

  const double t = base.c(0, 0);
  if (std::abs(t) <= tol)
    throw NotInFamily("state never reaches the output", std::abs(t));
  const double c_dev = (base.c.array() - t).abs().maxCoeff();
  if (c_dev > tol) throw NotInFamily("output rows are not uniform", c_dev);

  const Eigen::RowVectorXd b_scaled = base.b.row(0) * t;
  const double b0 = b_scaled.mean();
  const double b_dev = (b_scaled.array() - b0).abs().maxCoeff();
  if (b_dev > tol) throw NotInFamily("input rows are not uniform", b_dev);

  StaticCoreParams p;
  p.b0 = b0;
  p.b1 = VectorXd::Zero(s);
  p.b2 = VectorXd::Zero(s);
  if (s == 1) {
    p.b1(0) = base.d(0, 0);
  } else {
    // Gauge b1[0] = 0: the first row pins b2, the first column pins b1.
    p.b2 = base.d.row(0).transpose();
    for (int i = 1; i < s; ++i) p.b1(i) = base.d(i, 0) - p.b2(0);
  }
  const MatrixXd fit = p.b1 * Eigen::RowVectorXd::Ones(s) +
                       VectorXd::Ones(s) * p.b2.transpose();
  const double d_dev = max_abs(base.d - fit);
  if (d_dev > tol) throw NotInFamily("coupling is not row-plus-column", d_dev);
  return p;
}

StateSpace build_sigma_full(const MatrixXd& gamma, const MatrixXd& phi) {
  const int sc = static_cast<int>(gamma.cols());
  const int nu = static_cast<int>(gamma.rows());
  const int ny = static_cast<int>(phi.rows());
  require(phi.cols() == sc, "gamma and phi must share the defect width");

  MatrixXd b = MatrixXd::Zero(sc, ny + sc + nu);
  b.middleCols(ny, sc) = MatrixXd::Identity(sc, sc);
  MatrixXd c(nu + ny, sc);
  c << -gamma, phi;
  MatrixXd d = MatrixXd::Zero(nu + ny, ny + sc + nu);
  d.topRightCorner(nu, nu) = MatrixXd::Identity(nu, nu);
  d.bottomLeftCorner(ny, ny) = MatrixXd::Identity(ny, ny);
  return make_state_space(MatrixXd::Identity(sc, sc), b, c, d);
}

CoreFromFull full_to_core(const StateSpace& sigma_f, const MatrixXd& gamma,
                          const MatrixXd& phi, const DefectBasis& basis) {
  const int sc = static_cast<int>(phi.cols());
  const int nf = static_cast<int>(sigma_f.n());
  const int ny = static_cast<int>(phi.rows());
  const int nu = static_cast<int>(gamma.rows());
  const int r = basis.r;
  require(sigma_f.inputs() == ny, "subcontroller must read the measurement");
  require(sigma_f.outputs() == sc + nu, "subcontroller must emit drive and control");

  const MatrixXd r2 = basis.r_basis.rightCols(sc - r);
  const MatrixXd phi2 = phi * r2;
  if (rank_svd(phi2) < sc - r)
    throw RankDeficientPhi2("measurement map loses rank on the defect complement");

  const MatrixXd cf1 = sigma_f.c.topRows(sc);
  const MatrixXd cf2 = sigma_f.c.bottomRows(nu);
  const MatrixXd df1 = sigma_f.d.topRows(sc);
  const MatrixXd df2 = sigma_f.d.bottomRows(nu);

  Eigen::FullPivLU<MatrixXd> rlu(basis.r_basis);
  const MatrixXd rd = rlu.solve(df1);
  const MatrixXd rc = rlu.solve(cf1);

  const int na = sc - r;  // integrator states kept inside the core
  MatrixXd a(na + nf, na + nf), b(na + nf, ny);
  a << MatrixXd::Identity(na, na) + rd.bottomRows(na) * phi2, rc.bottomRows(na),
      sigma_f.b * phi2, sigma_f.a;
  b << rd.bottomRows(na), sigma_f.b;

  MatrixXd c(r + nu, na + nf), d(r + nu, ny);
  c << rd.topRows(r) * phi2, rc.topRows(r),
      -gamma * r2 + df2 * phi2, cf2;
  d << rd.topRows(r), df2;

  CoreFromFull out;
  out.core = make_state_space(a, b, c, d);
  out.r = r;
  out.theta12 = MatrixXd::Zero(r, sc - r);
  out.theta22 = MatrixXd::Zero(na + nf, sc - r);
  out.theta22.topRows(na) = -MatrixXd::Identity(na, na);
  return out;
}

StateSpace core_to_full(const StateSpace& core, int r, const MatrixXd& theta12,
                        const MatrixXd& theta22, const MatrixXd& phi2,
                        const DefectBasis& basis) {
  const int sc = static_cast<int>(basis.r_basis.rows());
  const int ny = static_cast<int>(core.inputs());
  const int nu = static_cast<int>(core.outputs()) - r;
  require(nu >= 0, "core must expose at least r outputs");
  require(phi2.rows() == ny && phi2.cols() == sc - r, "phi2 shape mismatch");
  if (rank_svd(phi2) < sc - r)
    throw RankDeficientPhi2("measurement map loses rank on the defect complement");
  const MatrixXd w = pinv(phi2);

  MatrixXd cf1 = MatrixXd::Zero(sc, core.n());
  cf1.topRows(r) = core.c.topRows(r);
  MatrixXd df1(sc, ny);
  df1 << core.d.topRows(r) - theta12 * w, -w;

  MatrixXd c(sc + nu, core.n()), d(sc + nu, ny);
  c << basis.r_basis * cf1, core.c.bottomRows(nu);
  d << basis.r_basis * df1, core.d.bottomRows(nu);
  return make_state_space(core.a, core.b - theta22 * w, c, d);
}

}  // namespace algoforge
