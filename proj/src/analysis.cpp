#include "algoforge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

constexpr double kLambdaBox = 1e3;

double lambda_max_sym(const MatrixXd& s) {
  if (s.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

void check_class_dims(const StateSpace& g, const OracleClass& cls) {
  const int sc = cls.s() * cls.c;
  if (g.inputs() != sc || g.outputs() != sc)
    throw std::invalid_argument(
        "interconnection must be square over the oracle channels");
}

}  // namespace

FilterCoefficients identity_filter(int s, int nu_max) {
  if (s < 1 || nu_max < 0)
    throw std::invalid_argument("filter shape must have s >= 1, nu_max >= 0");
  FilterCoefficients lam;
  lam.nu_max = nu_max;
  lam.lambda = MatrixXd::Zero(s, nu_max + 1);
  lam.lambda.col(0).setOnes();
  return lam;
}

bool filter_valid(const FilterCoefficients& lam, double rho, double tol) {
  if (rho <= 0.0) throw std::invalid_argument("rate must be positive");
  if (lam.lambda.cols() != lam.nu_max + 1)
    throw std::invalid_argument("coefficient table does not match nu_max");
  for (int i = 0; i < lam.lambda.rows(); ++i) {
    double sum = 0.0;
    for (int nu = 0; nu <= lam.nu_max; ++nu) {
      sum += std::pow(rho, -nu) * lam.lambda(i, nu);
      if (nu >= 1 && lam.lambda(i, nu) > tol) return false;
    }
    if (!(sum > tol)) return false;
  }
  return true;
}

FilterCoefficients filter_from_averaging(const MatrixXd& mu, double rho) {
  if (rho <= 0.0) throw std::invalid_argument("rate must be positive");
  if (mu.rows() < 1 || mu.cols() < 1)
    throw std::invalid_argument("averaging weights must be nonempty");
  FilterCoefficients lam;
  lam.nu_max = static_cast<int>(mu.cols()) - 1;
  lam.lambda = MatrixXd::Zero(mu.rows(), mu.cols());
  lam.lambda.col(0) = mu.rowwise().sum();
  for (int nu = 1; nu <= lam.nu_max; ++nu)
    lam.lambda.col(nu) = -std::pow(rho, nu) * mu.col(nu);
  return lam;
}

StateSpace build_filter(const FilterCoefficients& lam, int c) {
  if (c < 1) throw std::invalid_argument("block width must be positive");
  if (lam.lambda.cols() != lam.nu_max + 1 || lam.lambda.rows() < 1)
    throw std::invalid_argument("coefficient table does not match nu_max");
  const int s = static_cast<int>(lam.lambda.rows());
  const int nu = lam.nu_max;
  std::vector<StateSpace> blocks;
  blocks.reserve(s);
  for (int i = 0; i < s; ++i) {
    if (nu == 0) {
      blocks.push_back(static_gain(lam.lambda(i, 0) * MatrixXd::Identity(c, c)));
      continue;
    }
    MatrixXd a = MatrixXd::Zero(nu, nu);
    a.bottomLeftCorner(nu - 1, nu - 1).setIdentity();
    MatrixXd b = MatrixXd::Zero(nu, 1);
    b(0, 0) = 1.0;
    const MatrixXd cmat = lam.lambda.row(i).tail(nu);
    const MatrixXd dmat = lam.lambda.block(i, 0, 1, 1);
    blocks.push_back(kron_expand(make_state_space(a, b, cmat, dmat), c));
  }
  return blkdiag(blocks);
}

StateSpace sector_gain(const OracleClass& cls) {
  const int c = cls.c;
  const int sc = cls.s() * c;
  MatrixXd sigma = MatrixXd::Zero(sc, sc);
  MatrixXd slope = MatrixXd::Zero(sc, sc);
  for (int i = 0; i < cls.s(); ++i) {
    if (!(cls.m(i) < cls.L(i)))
      throw std::invalid_argument(
          "sector transform needs m < L on every block; widen degenerate "
          "blocks first");
    sigma.block(i * c, i * c, c, c) =
        sector_sigma(cls.m(i), cls.L(i)) * MatrixXd::Identity(c, c);
    slope.block(i * c, i * c, c, c) = cls.m(i) * MatrixXd::Identity(c, c);
  }
  MatrixXd d(2 * sc, 2 * sc);
  d.topLeftCorner(sc, sc) = -sigma;
  d.topRightCorner(sc, sc).setIdentity();
  d.bottomLeftCorner(sc, sc).setIdentity();
  d.bottomRightCorner(sc, sc) = slope;
  return static_gain(d);
}

StateSpace sector_transform(const StateSpace& g_bar, const OracleClass& cls) {
  check_class_dims(g_bar, cls);
  const int sc = cls.s() * cls.c;
  return star(sector_gain(cls), sc, sc, g_bar);
}

MatrixXd FilteredSystem::c_at(const MatrixXd& lambda) const {
  if (lambda.rows() != s || lambda.cols() != nu_max + 1)
    throw std::invalid_argument("coefficient table has the wrong shape");
  MatrixXd out = MatrixXd::Zero(c_basis.front().rows(), c_basis.front().cols());
  for (int i = 0; i < s; ++i)
    for (int nu = 0; nu <= nu_max; ++nu)
      out += lambda(i, nu) * c_basis[i * (nu_max + 1) + nu];
  return out;
}

MatrixXd FilteredSystem::d_at(const MatrixXd& lambda) const {
  if (lambda.rows() != s || lambda.cols() != nu_max + 1)
    throw std::invalid_argument("coefficient table has the wrong shape");
  MatrixXd out = MatrixXd::Zero(d_basis.front().rows(), d_basis.front().cols());
  for (int i = 0; i < s; ++i)
    for (int nu = 0; nu <= nu_max; ++nu)
      out += lambda(i, nu) * d_basis[i * (nu_max + 1) + nu];
  return out;
}

StateSpace FilteredSystem::instance(const FilterCoefficients& lam) const {
  return make_state_space(a, b, c_at(lam.lambda), d_at(lam.lambda));
}

FilteredSystem assemble_filtered(const StateSpace& g, const OracleClass& cls,
                                 double rho, int nu_max) {
  if (rho <= 0.0) throw std::invalid_argument("rate must be positive");
  if (nu_max < 0) throw std::invalid_argument("filter order must be nonnegative");
  check_class_dims(g, cls);
  const int s = cls.s();
  const int c = cls.c;
  const int sc = s * c;

  const StateSpace t = sector_transform(rho_weight(g, rho), cls);
  const int nt = t.n();
  const int npsi = s * nu_max * c;
  const int nh = npsi + nt;

  FilteredSystem f;
  f.s = s;
  f.c = c;
  f.nu_max = nu_max;

  // Shift registers stacked block-major ahead of the transformed plant state.
  MatrixXd apsi = MatrixXd::Zero(npsi, npsi);
  MatrixXd bpsi = MatrixXd::Zero(npsi, sc);
  for (int i = 0; i < s; ++i) {
    const int off = i * nu_max * c;
    if (nu_max > 1)
      apsi.block(off + c, off, (nu_max - 1) * c, (nu_max - 1) * c)
          .setIdentity();
    bpsi.block(off, i * c, c, c).setIdentity();
  }

  f.a = MatrixXd::Zero(nh, nh);
  f.a.topLeftCorner(npsi, npsi) = apsi;
  f.a.topRightCorner(npsi, nt) = bpsi * t.c;
  f.a.bottomRightCorner(nt, nt) = t.a;
  f.b = MatrixXd::Zero(nh, sc);
  f.b.topRows(npsi) = bpsi * t.d;
  f.b.bottomRows(nt) = t.b;

  f.c_basis.assign(static_cast<std::size_t>(s) * (nu_max + 1),
                   MatrixXd::Zero(sc, nh));
  f.d_basis.assign(static_cast<std::size_t>(s) * (nu_max + 1),
                   MatrixXd::Zero(sc, sc));
  for (int i = 0; i < s; ++i) {
    MatrixXd& c0 = f.c_basis[i * (nu_max + 1)];
    c0.block(i * c, npsi, c, nt) = t.c.middleRows(i * c, c);
    f.d_basis[i * (nu_max + 1)].middleRows(i * c, c) = t.d.middleRows(i * c, c);
    for (int nu = 1; nu <= nu_max; ++nu)
      f.c_basis[i * (nu_max + 1) + nu]
          .block(i * c, i * nu_max * c + (nu - 1) * c, c, c)
          .setIdentity();
  }
  return f;
}

namespace {

double filtered_scale(const FilteredSystem& f) {
  double scale = std::max(max_abs(f.a), max_abs(f.b));
  for (const auto& m : f.c_basis) scale = std::max(scale, max_abs(m));
  for (const auto& m : f.d_basis) scale = std::max(scale, max_abs(m));
  return scale;
}

// Symmetric contribution of the output data: 0.5 [[0, C'], [C, D + D']].
MatrixXd output_term(const MatrixXd& cmat, const MatrixXd& dmat) {
  const int nh = static_cast<int>(cmat.cols());
  const int sc = static_cast<int>(cmat.rows());
  MatrixXd m = MatrixXd::Zero(nh + sc, nh + sc);
  m.topRightCorner(nh, sc) = 0.5 * cmat.transpose();
  m.bottomLeftCorner(sc, nh) = 0.5 * cmat;
  m.bottomRightCorner(sc, sc) = 0.5 * (dmat + dmat.transpose());
  return m;
}

}  // namespace

CertifyOutcome antipassivity_certify(const StateSpace& g, const OracleClass& cls,
                                     double rho, int nu_max, CertifyMode mode,
                                     const FilterCoefficients* fixed_lambda) {
  if (rho <= 0.0) throw std::invalid_argument("rate must be positive");
  if (nu_max < 0) throw std::invalid_argument("filter order must be nonnegative");
  check_class_dims(g, cls);
  const int s = cls.s();
  const int c = cls.c;
  const int sc = s * c;
  if (!is_block_lower_triangular(g.d, s, c))
    throw IllPosed(
        "oracle feedthrough must be block lower triangular for rate analysis");

  FilterCoefficients fixed;
  if (mode == CertifyMode::FixedLambda) {
    fixed = fixed_lambda ? *fixed_lambda : identity_filter(s, nu_max);
    if (fixed.lambda.rows() != s)
      throw std::invalid_argument("fixed coefficients do not match the class");
    if (!filter_valid(fixed, rho))
      throw std::invalid_argument(
          "fixed coefficients are not valid multipliers at this rate");
    nu_max = fixed.nu_max;
  }

  const OracleClass wide = widen_degenerate(cls);
  const FilteredSystem f = assemble_filtered(g, wide, rho, nu_max);
  const int nh = static_cast<int>(f.a.rows());
  const double eps = 1e-7 * (1.0 + filtered_scale(f));

  LmiProblem prob;
  SymBlock mblk;
  if (nh > 0) mblk = prob.add_symmetric(nh);
  std::vector<int> lvar;
  if (mode == CertifyMode::Joint) {
    lvar.resize(static_cast<std::size_t>(s) * (nu_max + 1));
    for (auto& v : lvar) v = prob.add_scalar();
  }

  SymExpr main(nh + sc);
  if (nh > 0) {
    MatrixXd w1(nh, nh + sc);
    w1 << f.a, f.b;
    main.add_congruence(mblk, w1, 1.0);
    MatrixXd w2 = MatrixXd::Zero(nh, nh + sc);
    w2.leftCols(nh).setIdentity();
    main.add_congruence(mblk, w2, -1.0);
  }
  if (mode == CertifyMode::Joint) {
    for (int i = 0; i < s; ++i)
      for (int nu = 0; nu <= nu_max; ++nu) {
        const int idx = i * (nu_max + 1) + nu;
        main.add_term(lvar[idx], output_term(f.c_basis[idx], f.d_basis[idx]));
      }
  } else {
    main.add_constant(
        output_term(f.c_at(fixed.lambda), f.d_at(fixed.lambda)));
  }
  prob.require_negative(main, eps);

  if (nh > 0) {
    SymExpr pos(nh);
    pos.add_congruence(mblk, MatrixXd::Identity(nh, nh), -1.0);
    prob.require_negative(pos, eps);
  }
  if (mode == CertifyMode::Joint) {
    for (int i = 0; i < s; ++i) {
      SymExpr possum(1);
      for (int nu = 0; nu <= nu_max; ++nu)
        possum.add_term(lvar[i * (nu_max + 1) + nu],
                        std::pow(rho, -nu) * MatrixXd::Ones(1, 1));
      prob.require_positive(possum, eps);
      for (int nu = 1; nu <= nu_max; ++nu) {
        SymExpr neg(1);
        neg.add_term(lvar[i * (nu_max + 1) + nu], MatrixXd::Ones(1, 1));
        prob.require_negative(neg, 0.0);
      }
    }
    for (int v : lvar) {
      SymExpr hi(1), lo(1);
      hi.add_term(v, MatrixXd::Ones(1, 1));
      hi.add_constant(-kLambdaBox * MatrixXd::Ones(1, 1));
      lo.add_term(v, -MatrixXd::Ones(1, 1));
      lo.add_constant(-kLambdaBox * MatrixXd::Ones(1, 1));
      prob.require_negative(hi, 0.0);
      prob.require_negative(lo, 0.0);
    }
  }

  const LmiResult res = prob.solve();
  if (res.status == LmiStatus::Unknown)
    throw SolverUnknown("no verdict for the rate inequality at rho = " +
                        std::to_string(rho));
  CertifyOutcome out;
  if (res.status == LmiStatus::Infeasible) {
    out.deficit = std::max(0.0, -res.margin);
    return out;
  }

  Certificate cert;
  cert.rho = rho;
  cert.lyapunov_m = nh > 0 ? LmiProblem::unpack(mblk, res.x) : MatrixXd(0, 0);
  if (mode == CertifyMode::Joint) {
    cert.lambda.nu_max = nu_max;
    cert.lambda.lambda = MatrixXd::Zero(s, nu_max + 1);
    for (int i = 0; i < s; ++i)
      for (int nu = 0; nu <= nu_max; ++nu)
        cert.lambda.lambda(i, nu) = res.x(lvar[i * (nu_max + 1) + nu]);
  } else {
    cert.lambda = fixed;
  }
  cert.margin = res.margin;
  cert.trace = {{rho, true}};
  // The rate inequality forces strict negativity of the symmetrized
  // feedthrough; re-check it directly as a guard on the assembled data.
  const MatrixXd dhat = f.d_at(cert.lambda.lambda);
  if (lambda_max_sym(MatrixXd(dhat + dhat.transpose())) >= 0.0)
    throw SolverUnknown("certificate failed the feedthrough cross-check");
  out.certificate = std::move(cert);
  return out;
}

Certificate analyze_rate(const StateSpace& g, const OracleClass& cls,
                         const RateOptions& opts) {
  if (!(opts.rho_lo > 0.0) || !(opts.rho_hi > opts.rho_lo) || !(opts.tol > 0.0))
    throw std::invalid_argument("rate search window is malformed");
  std::vector<std::pair<double, bool>> trace;
  const auto probe = [&](double rho) -> CertifyOutcome {
    try {
      CertifyOutcome out =
          antipassivity_certify(g, cls, rho, opts.nu_max, CertifyMode::Joint);
      trace.emplace_back(rho, out.certified());
      return out;
    } catch (const SolverUnknown&) {
      trace.emplace_back(rho, false);
      return CertifyOutcome{};
    }
  };

  double hi = opts.rho_hi;
  double lo = opts.rho_lo;
  CertifyOutcome at_hi = probe(hi);
  if (!at_hi.certified())
    throw NeverCertified("no certifiable rate up to the top of the window",
                         at_hi.deficit);
  Certificate best = std::move(*at_hi.certificate);
  CertifyOutcome at_lo = probe(lo);
  if (at_lo.certified()) {
    best = std::move(*at_lo.certificate);
  } else {
    while (hi - lo > opts.tol) {
      const double mid = 0.5 * (hi + lo);
      CertifyOutcome at_mid = probe(mid);
      if (at_mid.certified()) {
        hi = mid;
        best = std::move(*at_mid.certificate);
      } else {
        lo = mid;
      }
    }
  }
  best.trace = std::move(trace);
  return best;
}

double empirical_dissipation_check(const Trajectory& traj,
                                   const OracleClass& cls, double rho,
                                   const FilterCoefficients& lam,
                                   const VectorXd& z_star,
                                   const VectorXd& w_star) {
  if (rho <= 0.0) throw std::invalid_argument("rate must be positive");
  const int s = cls.s();
  const int c = cls.c;
  const int sc = s * c;
  if (traj.z.cols() != sc || traj.w.cols() != sc)
    throw std::invalid_argument("trajectory does not match the oracle class");
  if (lam.lambda.rows() != s || lam.lambda.cols() != lam.nu_max + 1)
    throw std::invalid_argument("coefficient table does not match the class");
  VectorXd zs = z_star.size() ? z_star : VectorXd::Zero(sc);
  VectorXd ws = w_star.size() ? w_star : VectorXd::Zero(sc);
  if (zs.size() != sc || ws.size() != sc)
    throw std::invalid_argument("fixed-point signals have the wrong size");

  const int steps = traj.steps();
  if (steps == 0) return 0.0;
  const OracleClass wide = widen_degenerate(cls);

  MatrixXd zbar(steps, sc), wbar(steps, sc);
  double weight = 1.0;
  for (int k = 0; k < steps; ++k, weight /= rho) {
    zbar.row(k) = weight * (traj.z.row(k) - zs.transpose());
    wbar.row(k) = weight * (traj.w.row(k) - ws.transpose());
  }

  // q_i = w_i - m_i z_i, p_i = z_i - sigma_i q_i, r_i = lambda_i * p_i
  // (causal convolution); the certified inequality lower-bounds every
  // partial sum of <q, r> by zero.
  MatrixXd q(steps, sc), p(steps, sc), r(steps, sc);
  for (int i = 0; i < s; ++i) {
    const double mi = wide.m(i);
    const double si = sector_sigma(wide.m(i), wide.L(i));
    q.middleCols(i * c, c) =
        wbar.middleCols(i * c, c) - mi * zbar.middleCols(i * c, c);
    p.middleCols(i * c, c) =
        zbar.middleCols(i * c, c) - si * q.middleCols(i * c, c);
    for (int k = 0; k < steps; ++k) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(c);
      for (int nu = 0; nu <= std::min(k, lam.nu_max); ++nu)
        acc += lam.lambda(i, nu) * p.block(k - nu, i * c, 1, c);
      r.block(k, i * c, 1, c) = acc;
    }
  }

  double running = 0.0;
  double lowest = std::numeric_limits<double>::infinity();
  for (int k = 0; k < steps; ++k) {
    running += q.row(k).dot(r.row(k));
    lowest = std::min(lowest, running);
  }
  return lowest;
}

}  // namespace algoforge
