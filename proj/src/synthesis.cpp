#include "algoforge/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "algoforge/errors.hpp"
#include "algoforge/executor.hpp"
#include "algoforge/lmi.hpp"

namespace algoforge {

namespace {

constexpr double kCondLimit = 1e12;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// X E^{-1} through the transposed factorization.
MatrixXd right_solve(const MatrixXd& x, const Eigen::PartialPivLU<MatrixXd>& lut) {
  return lut.solve(x.transpose()).transpose();
}

double sigma_max_at(const StateSpace& g, std::complex<double> z) {
  const Eigen::MatrixXcd t = transfer_at(g, z);
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(t).singularValues()(0);
}

// Frequency-grid sup of the largest singular value with a local golden-ratio
// refinement; a search surrogate, not a certificate.
double hinf_grid_norm(const StateSpace& g, int grid = 181) {
  const std::complex<double> j(0.0, 1.0);
  double best = 0.0, arg = 0.0;
  for (int k = 0; k < grid; ++k) {
    const double th = M_PI * k / (grid - 1);
    const double v = sigma_max_at(g, std::exp(j * th));
    if (v > best) {
      best = v;
      arg = th;
    }
  }
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = std::max(0.0, arg - M_PI / (grid - 1));
  double hi = std::min(M_PI, arg + M_PI / (grid - 1));
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = -sigma_max_at(g, std::exp(j * x1));
  double f2 = -sigma_max_at(g, std::exp(j * x2));
  for (int it = 0; it < 40; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = -sigma_max_at(g, std::exp(j * x1));
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = -sigma_max_at(g, std::exp(j * x2));
    }
  }
  return std::max(best, std::max(-f1, -f2));
}

// Portable deterministic gaussian (Box-Muller over the engine's top bits);
// std::normal_distribution is not pinned across standard libraries.
double unit_gauss(std::mt19937_64& gen) {
  const double u1 = ((gen() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  const double u2 = ((gen() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct SimplexOut {
  VectorXd y;
  double value = std::numeric_limits<double>::infinity();
};

SimplexOut nelder_mead(const std::function<double(const VectorXd&)>& f,
                       const VectorXd& y0, double init_step, int max_iters) {
  const int n = static_cast<int>(y0.size());
  if (n == 0) return {y0, f(y0)};
  std::vector<std::pair<double, VectorXd>> simplex;
  simplex.reserve(n + 1);
  simplex.emplace_back(f(y0), y0);
  for (int i = 0; i < n; ++i) {
    VectorXd y = y0;
    y(i) += init_step * (1.0 + std::abs(y0(i)));
    simplex.emplace_back(f(y), y);
  }
  auto by_value = [](const auto& a, const auto& b) { return a.first < b.first; };
  for (int it = 0; it < max_iters; ++it) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    const double spread = simplex.back().first - simplex.front().first;
    if (spread < 1e-11 * (1.0 + std::abs(simplex.front().first))) break;
    VectorXd centroid = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += simplex[i].second;
    centroid /= n;
    const VectorXd& worst = simplex[n].second;
    const VectorXd xr = centroid + (centroid - worst);
    const double fr = f(xr);
    if (fr < simplex[0].first) {
      const VectorXd xe = centroid + 2.0 * (centroid - worst);
      const double fe = f(xe);
      simplex[n] = fe < fr ? std::make_pair(fe, xe) : std::make_pair(fr, xr);
    } else if (fr < simplex[n - 1].first) {
      simplex[n] = {fr, xr};
    } else {
      const VectorXd xc = fr < simplex[n].first
                              ? VectorXd(centroid + 0.5 * (xr - centroid))
                              : VectorXd(centroid + 0.5 * (worst - centroid));
      const double fc = f(xc);
      if (fc < std::min(fr, simplex[n].first)) {
        simplex[n] = {fc, xc};
      } else {
        for (int i = 1; i <= n; ++i) {
          simplex[i].second =
              simplex[0].second + 0.5 * (simplex[i].second - simplex[0].second);
          simplex[i].first = f(simplex[i].second);
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(), by_value);
  return {simplex.front().second, simplex.front().first};
}

int thread_budget() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("ALGOFORGE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 64) n = static_cast<unsigned>(v);
  }
  return static_cast<int>(n);
}

}  // namespace

InfoStructure dense_info(int out_blocks, int in_blocks) {
  require(out_blocks >= 1 && in_blocks >= 1, "block counts must be positive");
  InfoStructure info;
  info.mask = Eigen::MatrixXi::Ones(out_blocks, in_blocks);
  return info;
}

InfoStructure lower_triangular_info(int blocks) {
  require(blocks >= 1, "block count must be positive");
  InfoStructure info;
  info.mask = Eigen::MatrixXi::Zero(blocks, blocks);
  for (int i = 0; i < blocks; ++i)
    for (int j = 0; j <= i; ++j) info.mask(i, j) = 1;
  return info;
}

double mask_residual(const MatrixXd& m, const InfoStructure& info, int c) {
  require(c >= 1, "block width must be positive");
  require(m.rows() == info.mask.rows() * c && m.cols() == info.mask.cols() * c,
          "matrix does not tile the mask at width c");
  double res = 0.0;
  for (int bi = 0; bi < info.mask.rows(); ++bi)
    for (int bj = 0; bj < info.mask.cols(); ++bj)
      if (!info.mask(bi, bj))
        res = std::max(res, max_abs(m.block(bi * c, bj * c, c, c)));
  return res;
}

PartitionedPlant build_synthesis_plant(const PartitionedPlant& p,
                                       const RegulatorSolution& reg,
                                       const OracleClass& cls, double rho,
                                       const FilterCoefficients& lam) {
  require(rho > 0.0, "rate must be positive");
  const OracleClass wide = widen_degenerate(cls);
  const int s = wide.s(), c = wide.c, sc = s * c;
  require(p.s == s && p.c == c, "class does not match the network blocks");
  require(reg.gamma.rows() == p.nu() && reg.gamma.cols() == sc,
          "regulator gain does not match the network");
  require(reg.phi.rows() == p.ny() && reg.phi.cols() == sc,
          "steady measurement map does not match the network");
  if (!filter_valid(lam, rho))
    throw std::invalid_argument("filter coefficients are invalid at this rate");

  const StateSpace pbar = rho_weight(to_state_space(p), rho);
  const StateSpace sfull = rho_weight(build_sigma_full(reg.gamma, reg.phi), rho);
  const StateSpace pf = star(pbar, p.nu(), p.ny(), sfull);
  const StateSpace sect = star(sector_gain(wide), sc, sc, pf);
  const StateSpace psi = blkdiag(
      build_filter(lam, c),
      static_gain(MatrixXd::Identity(p.ny(), p.ny())));
  return from_state_space(cascade(psi, sect), s, c, sc + p.nu(), p.ny());
}

std::pair<PartitionedPlant, MatrixXd> remove_feedthrough(const PartitionedPlant& p_hat) {
  PartitionedPlant zeroed = p_hat;
  MatrixXd d2 = p_hat.d2;
  zeroed.d2 = MatrixXd::Zero(d2.rows(), d2.cols());
  return {zeroed, d2};
}

StateSpace hinf_equiv_loopshift(const StateSpace& g, int q_width) {
  require(q_width >= 1 && q_width <= g.inputs() && q_width <= g.outputs(),
          "channel width out of range");
  const int n = g.n();
  const int m2 = g.inputs() - q_width, p2 = g.outputs() - q_width;
  const MatrixXd b1 = g.b.leftCols(q_width), b2 = g.b.rightCols(m2);
  const MatrixXd c1 = g.c.topRows(q_width), c2 = g.c.bottomRows(p2);
  const MatrixXd d11 = g.d.topLeftCorner(q_width, q_width);
  const MatrixXd d12 = g.d.topRightCorner(q_width, m2);
  const MatrixXd d21 = g.d.bottomLeftCorner(p2, q_width);
  const MatrixXd d22 = g.d.bottomRightCorner(p2, m2);

  const MatrixXd eye = MatrixXd::Identity(q_width, q_width);
  const MatrixXd loop = eye - d11;
  if (cond_2(loop) >= kCondLimit)
    throw IllPosed("loop shift: I - D over the channel is singular");
  const Eigen::PartialPivLU<MatrixXd> lu(loop);
  const Eigen::PartialPivLU<MatrixXd> lut(MatrixXd(loop.transpose()));
  const MatrixXd ec1 = lu.solve(c1);
  const MatrixXd ed11 = lu.solve(d11);
  const MatrixXd ed12 = lu.solve(d12);
  const double r2 = std::sqrt(2.0);

  MatrixXd b(n, g.inputs()), c(g.outputs(), n), d(g.outputs(), g.inputs());
  b << r2 * right_solve(b1, lut), b2 + b1 * ed12;
  c << r2 * ec1, c2 + d21 * ec1;
  d.topLeftCorner(q_width, q_width) = eye + 2.0 * ed11;
  d.topRightCorner(q_width, m2) = r2 * ed12;
  d.bottomLeftCorner(p2, q_width) = r2 * right_solve(d21, lut);
  d.bottomRightCorner(p2, m2) = d22 + d21 * ed12;
  return make_state_space(g.a + b1 * ec1, b, c, d);
}

PartitionedPlant hinf_equiv_loopshift(const PartitionedPlant& p_hat) {
  const StateSpace g = hinf_equiv_loopshift(to_state_space(p_hat), p_hat.zw());
  return from_state_space(g, p_hat.s, p_hat.c, p_hat.nu(), p_hat.ny());
}

StateSpace full_order_step(const PartitionedPlant& p0, const InfoStructure& info,
                           const FullOrderOptions& opts) {
  const int n = p0.n(), sc = p0.zw(), nut = p0.nu(), nyt = p0.ny(), c = p0.c;
  require(n >= 1, "synthesis plant must carry state");
  const int nu2 = nut - sc;
  require(nu2 >= 0, "control channel narrower than the drive rows");
  require(info.mask.rows() * c == nu2 && info.mask.cols() * c == nyt,
          "information mask does not match the control feedthrough");
  if (max_abs(p0.d2) > 1e-12 * (1.0 + max_abs(p0.d1)))
    throw std::invalid_argument("control feedthrough must be removed first");
  if (!pbh_stabilizable(p0.a, p0.b2))
    throw NotSynthesizable("synthesis plant is not stabilizable from the control channel");
  if (!pbh_detectable(p0.a, p0.c2))
    throw NotSynthesizable("synthesis plant is not detectable from the measurement");

  // Free scalars: X, Y (upper triangles), the transformed controller blocks
  // row-major, and the unmasked feedthrough entries. The change of variables
  // keeps the controller feedthrough itself as a variable, so mask zeros are
  // exact by omission.
  std::vector<std::pair<int, int>> dfree;
  for (int i = 0; i < nut; ++i)
    for (int j = 0; j < nyt; ++j) {
      if (i >= sc && !info.mask((i - sc) / c, j / c)) continue;
      dfree.emplace_back(i, j);
    }
  const int nsym = n * (n + 1) / 2;
  const int off_y = nsym, off_a = 2 * nsym, off_b = off_a + n * n;
  const int off_c = off_b + n * nyt, off_d = off_c + nut * n;
  const int nvars = off_d + static_cast<int>(dfree.size());

  struct Mats {
    MatrixXd x, y, ah, bh, ch, dh;
  };
  auto unpack_vars = [&](const VectorXd& v) {
    Mats m;
    m.x = MatrixXd::Zero(n, n);
    m.y = MatrixXd::Zero(n, n);
    int k = 0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i, ++k) {
        m.x(i, j) = m.x(j, i) = v(k);
        m.y(i, j) = m.y(j, i) = v(off_y + k);
      }
    m.ah = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m.ah(i, j) = v(off_a + i * n + j);
    m.bh = MatrixXd::Zero(n, nyt);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < nyt; ++j) m.bh(i, j) = v(off_b + i * nyt + j);
    m.ch = MatrixXd::Zero(nut, n);
    for (int i = 0; i < nut; ++i)
      for (int j = 0; j < n; ++j) m.ch(i, j) = v(off_c + i * n + j);
    m.dh = MatrixXd::Zero(nut, nyt);
    for (std::size_t k2 = 0; k2 < dfree.size(); ++k2)
      m.dh(dfree[k2].first, dfree[k2].second) = v(off_d + static_cast<int>(k2));
    return m;
  };

  const MatrixXd& A = p0.a;
  const MatrixXd& B1 = p0.b1;
  const MatrixXd& B2 = p0.b2;
  const MatrixXd& C1 = p0.c1;
  const MatrixXd& D11 = p0.d1;
  const MatrixXd& D12 = p0.d12;
  const MatrixXd& C2 = p0.c2;
  const MatrixXd& D21 = p0.d21;

  const int nz = 2 * n;
  const int nm = 2 * nz + 2 * sc;
  // Closed-loop bounded-real inequality after the congruence with
  // diag(Pi1, I, Pi1, I): all blocks affine in the transformed variables.
  auto big = [&](const Mats& m) {
    MatrixXd acl(nz, nz), bcl(nz, sc), ccl(sc, nz), dcl(sc, sc), z(nz, nz);
    acl.topLeftCorner(n, n) = A * m.y + B2 * m.ch;
    acl.topRightCorner(n, n) = A + B2 * m.dh * C2;
    acl.bottomLeftCorner(n, n) = m.ah;
    acl.bottomRightCorner(n, n) = m.x * A + m.bh * C2;
    bcl.topRows(n) = B1 + B2 * m.dh * D21;
    bcl.bottomRows(n) = m.x * B1 + m.bh * D21;
    ccl.leftCols(n) = C1 * m.y + D12 * m.ch;
    ccl.rightCols(n) = C1 + D12 * m.dh * C2;
    dcl = D11 + D12 * m.dh * D21;
    z.topLeftCorner(n, n) = m.y;
    z.topRightCorner(n, n) = MatrixXd::Identity(n, n);
    z.bottomLeftCorner(n, n) = MatrixXd::Identity(n, n);
    z.bottomRightCorner(n, n) = m.x;

    MatrixXd lmi = MatrixXd::Zero(nm, nm);
    const int o2 = nz, o3 = nz + sc, o4 = 2 * nz + sc;
    lmi.block(0, 0, nz, nz) = -z;
    lmi.block(o2, o2, sc, sc) = -MatrixXd::Identity(sc, sc);
    lmi.block(o3, o3, nz, nz) = -z;
    lmi.block(o4, o4, sc, sc) = -MatrixXd::Identity(sc, sc);
    lmi.block(o3, 0, nz, nz) = acl;
    lmi.block(0, o3, nz, nz) = acl.transpose();
    lmi.block(o3, o2, nz, sc) = bcl;
    lmi.block(o2, o3, sc, nz) = bcl.transpose();
    lmi.block(o4, 0, sc, nz) = ccl;
    lmi.block(0, o4, nz, sc) = ccl.transpose();
    lmi.block(o4, o2, sc, sc) = dcl;
    lmi.block(o2, o4, sc, sc) = dcl.transpose();
    return std::make_pair(lmi, z);
  };

  LmiProblem prob;
  for (int k = 0; k < nvars; ++k) prob.add_scalar();
  const auto [f0m, f0z] = big(unpack_vars(VectorXd::Zero(nvars)));
  SymExpr main_expr(nm), z_expr(nz);
  main_expr.add_constant(f0m);
  z_expr.add_constant(f0z);
  VectorXd probe = VectorXd::Zero(nvars);
  for (int k = 0; k < nvars; ++k) {
    probe(k) = 1.0;
    const auto [fm, fz] = big(unpack_vars(probe));
    probe(k) = 0.0;
    const MatrixXd dm = fm - f0m;
    const MatrixXd dz = fz - f0z;
    if (max_abs(dm) > 0.0) main_expr.add_term(k, dm);
    if (max_abs(dz) > 0.0) z_expr.add_term(k, dz);
  }

  const double scale = 1.0 + std::max({max_abs(A), max_abs(B1), max_abs(B2),
                                       max_abs(C1), max_abs(C2), max_abs(D11),
                                       max_abs(D12), max_abs(D21)});
  const double eps = opts.eps_rel * scale;
  prob.require_negative(main_expr, eps);
  prob.require_positive(z_expr, eps);

  // U = Y^{-1} - X, V = Y satisfies X Y + U V' = I; U is negative definite
  // whenever [[Y, I],[I, X]] > 0, so the loop back to controller data is
  // well posed at any interior point. First-touch points from a quick solve
  // can still be badly conditioned; retry once with full centering.
  for (int attempt = 0; attempt < 2; ++attempt) {
    const bool quick = opts.quick && attempt == 0;
    LmiOptions lo;
    lo.stop_at_feasible = quick;
    lo.tau_max = opts.tau_max;
    lo.var_bound = opts.var_bound;
    const LmiResult res = prob.solve(lo);
    if (res.status == LmiStatus::Infeasible)
      throw NotSynthesizable(
          "full-order synthesis inequalities are infeasible at this rate");
    if (res.status != LmiStatus::Feasible)
      throw SolverUnknown("full-order synthesis backend reached no verdict");

    const Mats m = unpack_vars(res.x);
    const MatrixXd eye_n = MatrixXd::Identity(n, n);
    const MatrixXd yinv = m.y.llt().solve(eye_n);
    const MatrixXd u = yinv - m.x;
    const Eigen::PartialPivLU<MatrixXd> ulu(u);
    const MatrixXd dk = m.dh;
    const MatrixXd ck = (m.ch - dk * C2 * m.y) * yinv;
    const MatrixXd bk = ulu.solve(m.bh - m.x * B2 * dk);
    const MatrixXd ak =
        ulu.solve(m.ah - m.x * (A + B2 * dk * C2) * m.y - u * bk * C2 * m.y -
                  m.x * B2 * ck * m.y) *
        yinv;
    const StateSpace sigma_f0 = make_state_space(ak, bk, ck, dk);
    if (is_schur(close_controller(p0, sigma_f0).a)) return sigma_f0;
    if (!quick) break;
  }
  throw SolverUnknown("reconstructed controller failed the stability re-check");
}

ReinsertedController reinsert_feedthrough(const StateSpace& sigma_f0,
                                          const MatrixXd& d_hat_2) {
  require(d_hat_2.rows() == sigma_f0.inputs() && d_hat_2.cols() == sigma_f0.outputs(),
          "feedthrough block does not match the controller channel");
  const int ny = sigma_f0.inputs();
  const double base = 1.0 + max_abs(d_hat_2);
  ReinsertedController out;
  MatrixXd d2 = d_hat_2;
  double bump = 0.0;
  while (cond_2(MatrixXd::Identity(ny, ny) + d2 * sigma_f0.d) >= kCondLimit) {
    if (bump >= 1e-9 * base)
      throw IllPosed("feedthrough reinsertion stays singular after the allowed perturbation");
    bump = (bump == 0.0) ? 1e-13 * base : std::min(bump * 10.0, 1e-9 * base);
    d2 = d_hat_2 + bump * MatrixXd::Identity(d_hat_2.rows(), d_hat_2.cols());
  }
  out.perturbation = bump;

  const MatrixXd ed = MatrixXd::Identity(ny, ny) + d2 * sigma_f0.d;
  const Eigen::PartialPivLU<MatrixXd> edt(MatrixXd(ed.transpose()));
  const MatrixXd b0e = right_solve(sigma_f0.b, edt);
  const MatrixXd d0e = right_solve(sigma_f0.d, edt);
  out.sigma_f = make_state_space(sigma_f0.a - b0e * d2 * sigma_f0.c, b0e,
                                 sigma_f0.c - d0e * d2 * sigma_f0.c, d0e);
  return out;
}

namespace {

struct PipelineOut {
  StateSpace sigma_f;  // unweighted: closes against sigma_full directly
  double perturbation = 0.0;
};

PipelineOut run_full_pipeline(const PartitionedPlant& p, const RegulatorSolution& reg,
                              const OracleClass& cls, double rho,
                              const FilterCoefficients& lam, const InfoStructure& info,
                              bool quick) {
  const PartitionedPlant phat = build_synthesis_plant(p, reg, cls, rho, lam);
  const PartitionedPlant shifted = hinf_equiv_loopshift(phat);
  const auto [p0, d2] = remove_feedthrough(shifted);
  FullOrderOptions fo;
  fo.quick = quick;
  const StateSpace sf0 = full_order_step(p0, info, fo);
  ReinsertedController re = reinsert_feedthrough(sf0, d2);
  return {rho_weight(re.sigma_f, 1.0 / rho), re.perturbation};
}

// Decay of the closed loop against in-class quadratic surrogates; vacuous
// when the information pattern leaves the loop non-executable.
void simulation_envelope(const PartitionedPlant& p, const StateSpace& k,
                         const OracleClass& cls, double rho) {
  const StateSpace g = close_controller(p, k);
  if (!is_block_lower_triangular(g.d, cls.s(), cls.c)) return;
  std::vector<BlockOracle> oracles;
  for (int i = 0; i < cls.s(); ++i) {
    const double slope = std::isfinite(cls.L(i)) ? 0.5 * (cls.m(i) + cls.L(i))
                                                 : cls.m(i) + 1.0;
    VectorXd beta0(cls.c);
    for (int j = 0; j < cls.c; ++j) beta0(j) = std::sin(1.0 + i + 0.7 * j);
    oracles.push_back(GeneralQuadratic{
        slope * MatrixXd::Identity(cls.c, cls.c), beta0});
  }
  const AlgorithmSystem alg = make_algorithm(g, oracles, cls);
  const FixedPoint fp = solve_fixed_point_quadratic(alg);
  VectorXd x0 = fp.x + VectorXd::Ones(g.n());
  SimulateOptions so;
  so.steps = 300;
  const Trajectory traj = simulate(alg, x0, so);
  if (traj.diverged)
    throw SolverUnknown("simulation envelope violated: trajectory diverged");
  double rate = 0.0;
  try {
    rate = measure_rate(traj, fp.x);
  } catch (const NonConvergent&) {
    throw SolverUnknown("simulation envelope violated: no geometric decay");
  }
  if (rate > rho + 0.05)
    throw SolverUnknown("simulation envelope violated: decay slower than certified");
}

}  // namespace

SynthesisResult alternate_synthesis(const PartitionedPlant& p, const OracleClass& cls,
                                    const InfoStructure& info,
                                    const AlternationOptions& opts) {
  require(opts.rho_lo > 0.0 && opts.rho_hi > opts.rho_lo, "rate window is empty");
  require(opts.max_iters >= 1, "need at least one alternation step");
  const OracleClass wide = widen_degenerate(cls);
  require(wide.s() == p.s && wide.c == p.c, "class does not match the network blocks");
  const MatrixXd ncons = default_consensus(p.s, p.c);
  const AssumptionReport audit = check_assumptions(p, wide.m, ncons);
  if (!audit.all())
    throw NotSynthesizable("plant/class pair fails the synthesis assumptions");
  const RegulatorSolution reg = solve_plant_regulator(p, ncons);
  const StateSpace sfull = build_sigma_full(reg.gamma, reg.phi);

  SynthesisResult out;
  out.mode = SynthesisMode::Full;
  FilterCoefficients lam = identity_filter(p.s, opts.nu_max);

  auto try_rho = [&](double rho, bool quick) -> std::optional<PipelineOut> {
    if (!filter_valid(lam, rho)) return std::nullopt;
    try {
      return run_full_pipeline(p, reg, wide, rho, lam, info, quick);
    } catch (const NotSynthesizable&) {
      return std::nullopt;
    } catch (const SolverUnknown&) {
      return std::nullopt;
    }
  };

  bool have_best = false;
  StateSpace best_k, best_sf, best_g;
  Certificate best_cert;
  double hi = opts.rho_hi;
  double prev_rho = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    // (i) bisect the smallest rate the full-order step still certifies
    if (iter == 0) {
      run_full_pipeline(p, reg, wide, hi, lam, info, true);  // top-of-window gate
    } else if (!try_rho(hi, true)) {
      break;  // margin-edge conservatism: keep the previous design
    }
    double rho_feas = hi;
    if (try_rho(opts.rho_lo, true)) {
      rho_feas = opts.rho_lo;
    } else {
      double bad = opts.rho_lo, good = hi;
      while (good - bad > opts.bisect_tol) {
        const double mid = 0.5 * (bad + good);
        if (try_rho(mid, true))
          good = mid;
        else
          bad = mid;
      }
      rho_feas = good;
    }
    auto fin = try_rho(rho_feas, false);
    if (!fin) fin = try_rho(rho_feas, true);
    if (!fin) break;
    out.feedthrough_perturbation =
        std::max(out.feedthrough_perturbation, fin->perturbation);
    const StateSpace k = star(sfull, p.zw() + p.nu(), p.ny(), fin->sigma_f);
    const StateSpace g = close_controller(p, k);
    out.rho_log.push_back(rho_feas);

    // (ii) re-optimize the coefficients on the fixed controller; the window
    // opens below the user floor so a synthesis hit at the floor itself still
    // leaves room to search
    RateOptions ro;
    ro.rho_lo = std::min(opts.rho_lo, 0.5 * rho_feas);
    ro.rho_hi = rho_feas;
    ro.tol = opts.tol;
    ro.nu_max = opts.nu_max;
    Certificate cert;
    try {
      cert = analyze_rate(g, cls, ro);
    } catch (const NeverCertified&) {
      if (!have_best)
        throw SolverUnknown("synthesized loop failed its own re-analysis");
      break;
    }
    out.rho_log.push_back(cert.rho);
    best_k = k;
    best_sf = fin->sigma_f;
    best_g = g;
    best_cert = cert;
    have_best = true;
    lam = cert.lambda;
    hi = cert.rho;
    if (prev_rho - cert.rho < opts.tol) break;
    prev_rho = cert.rho;
  }
  if (!have_best)
    throw NotSynthesizable("no certified design inside the rate window");

  out.controller = best_k;
  out.subcontroller = best_sf;
  out.lambda = best_cert.lambda;
  out.rho = best_cert.rho;

  const ControllerRegulator creg =
      solve_controller_regulator(best_k, reg.phi, reg.gamma);
  out.regulator_residual = creg.residual;
  const double rscale = 1.0 + max_abs(reg.gamma) + max_abs(reg.phi);
  if (creg.residual > 1e-7 * rscale)
    throw SolverUnknown("synthesized controller misses the regulator equation");

  const CertifyOutcome reval = antipassivity_certify(
      best_g, cls, out.rho, opts.nu_max, CertifyMode::FixedLambda, &out.lambda);
  if (!reval.certified())
    throw SolverUnknown("final certificate failed revalidation");
  simulation_envelope(p, best_k, cls, out.rho);
  return out;
}

SynthesisResult structured_synthesis(const PartitionedPlant& p,
                                     const RegulatorSolution& reg,
                                     const MatrixXd& theta22, const InfoStructure& info,
                                     const OracleClass& cls, double rho,
                                     const StructuredOptions& opts) {
  require(rho > 0.0, "rate must be positive");
  require(opts.restarts >= 1, "need at least one restart");
  const OracleClass wide = widen_degenerate(cls);
  const int s = p.s, c = p.c, sc = p.zw(), nu = p.nu(), ny = p.ny();
  require(wide.s() == s && wide.c == c, "class does not match the network blocks");
  require(reg.gamma.rows() == nu && reg.gamma.cols() == sc,
          "regulator gain does not match the network");
  require(reg.phi.rows() == ny && reg.phi.cols() == sc,
          "steady measurement map does not match the network");
  require(info.mask.rows() * c == nu && info.mask.cols() * c == ny,
          "information mask does not match the control feedthrough");

  const DefectBasis basis = defect_basis(reg.phi);
  const int r = basis.r;
  require(theta22.cols() == sc - r,
          "theta22 must have one column per non-defect direction");
  const int nxi = static_cast<int>(theta22.rows());
  const MatrixXd r1 = basis.r_basis.leftCols(r);
  const MatrixXd r2 = basis.r_basis.rightCols(sc - r);
  const MatrixXd gamma1 = reg.gamma * r1;
  const MatrixXd gamma2 = reg.gamma * r2;
  const MatrixXd phi2 = reg.phi * r2;

  MatrixXd min_b = MatrixXd::Zero(r, r + nu);
  min_b.leftCols(r) = MatrixXd::Identity(r, r);
  MatrixXd min_d = MatrixXd::Zero(nu, r + nu);
  min_d.rightCols(nu) = MatrixXd::Identity(nu, nu);
  const StateSpace sigma_min =
      make_state_space(MatrixXd::Identity(r, r), min_b, -gamma1, min_d);

  // Free scalars: core (A, B, C1, D1, C2, unmasked D2) row-major, then
  // theta12. The structural constraint is affine in all of them.
  std::vector<std::pair<int, int>> d2free;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < ny; ++j)
      if (info.mask(i / c, j / c)) d2free.emplace_back(i, j);
  const int oa = 0, ob = nxi * nxi, oc1 = ob + nxi * ny, od1 = oc1 + r * nxi;
  const int oc2 = od1 + r * ny, od2 = oc2 + nu * nxi;
  const int oth = od2 + static_cast<int>(d2free.size());
  const int nv = oth + r * (sc - r);

  struct CoreMats {
    MatrixXd a, b, c1, d1, c2, d2, th12;
  };
  auto unpack_core = [&](const VectorXd& v) {
    CoreMats m;
    auto fill = [&](int rows, int cols, int off) {
      MatrixXd out(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = v(off + i * cols + j);
      return out;
    };
    m.a = fill(nxi, nxi, oa);
    m.b = fill(nxi, ny, ob);
    m.c1 = fill(r, nxi, oc1);
    m.d1 = fill(r, ny, od1);
    m.c2 = fill(nu, nxi, oc2);
    m.d2 = MatrixXd::Zero(nu, ny);
    for (std::size_t k = 0; k < d2free.size(); ++k)
      m.d2(d2free[k].first, d2free[k].second) = v(od2 + static_cast<int>(k));
    m.th12 = fill(r, sc - r, oth);
    return m;
  };
  auto residual_vec = [&](const VectorXd& v) {
    const CoreMats m = unpack_core(v);
    const MatrixXd e1 = m.a * theta22 + m.b * phi2 - theta22;
    const MatrixXd e2 = m.c1 * theta22 + m.d1 * phi2;
    const MatrixXd e3 =
        m.c2 * theta22 + m.d2 * phi2 - gamma1 * m.th12 - gamma2;
    VectorXd out(e1.size() + e2.size() + e3.size());
    int k = 0;
    for (const MatrixXd* e : {&e1, &e2, &e3})
      for (int i = 0; i < e->rows(); ++i)
        for (int j = 0; j < e->cols(); ++j) out(k++) = (*e)(i, j);
    return out;
  };

  const VectorXd r0 = residual_vec(VectorXd::Zero(nv));
  MatrixXd cons(r0.size(), nv);
  {
    VectorXd probe = VectorXd::Zero(nv);
    for (int k = 0; k < nv; ++k) {
      probe(k) = 1.0;
      cons.col(k) = residual_vec(probe) - r0;
      probe(k) = 0.0;
    }
  }
  const VectorXd vp = pinv(cons) * (-r0);
  const double cscale = 1.0 + max_abs(reg.gamma) + max_abs(reg.phi) + max_abs(theta22);
  if ((cons * vp + r0).cwiseAbs().maxCoeff() > 1e-8 * cscale)
    throw NotSynthesizable("no core subcontroller matches theta22 under this mask");
  const MatrixXd nsp = nullspace_basis(cons);
  const int nfree = static_cast<int>(nsp.cols());

  auto build_core = [&](const CoreMats& m) {
    MatrixXd cc(r + nu, nxi), dd(r + nu, ny);
    cc << m.c1, m.c2;
    dd << m.d1, m.d2;
    return make_state_space(m.a, m.b, cc, dd);
  };
  auto loop_of = [&](const VectorXd& y) {
    const CoreMats m = unpack_core(vp + nsp * y);
    return close_controller(p, cascade(sigma_min, build_core(m)));
  };
  auto objective_at = [&](const FilterCoefficients& lam) {
    return [&, lam](const VectorXd& y) -> double {
      try {
        const StateSpace g = loop_of(y);
        const FilteredSystem fs = assemble_filtered(g, wide, rho, lam.nu_max);
        const StateSpace shifted = hinf_equiv_loopshift(fs.instance(lam), sc);
        const double sr = spectral_radius(shifted.a);
        if (sr >= 1.0 - 1e-9) return 10.0 + sr;
        return hinf_grid_norm(shifted);
      } catch (const IllPosed&) {
        return 1e6;
      }
    };
  };

  const FilterCoefficients lam0 = identity_filter(s, opts.nu_max);
  const double scales[] = {0.05, 0.2, 0.5, 1.5, 4.0};

  // Restarts are pure and independent; run them on a small pool and keep
  // results indexed by restart so the outcome is order-deterministic.
  std::vector<SimplexOut> runs(opts.restarts);
  {
    auto obj0 = objective_at(lam0);
    auto worker = [&](int begin, int step) {
      for (int rr = begin; rr < opts.restarts; rr += step) {
        VectorXd y0 = VectorXd::Zero(nfree);
        if (rr > 0) {
          std::mt19937_64 gen(opts.seed * 0x9E3779B97F4A7C15ull +
                              static_cast<std::uint64_t>(rr));
          const double sig = scales[(rr - 1) % 5];
          for (int i = 0; i < nfree; ++i) y0(i) = sig * unit_gauss(gen);
        }
        runs[rr] = nelder_mead(obj0, y0, 0.25, opts.simplex_iters);
      }
    };
    const int nthreads = std::min(thread_budget(), opts.restarts);
    if (nthreads <= 1) {
      worker(0, 1);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(nthreads);
      for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t, nthreads);
      for (auto& th : pool) th.join();
    }
  }

  std::vector<int> order(opts.restarts);
  for (int i = 0; i < opts.restarts; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return runs[a].value < runs[b].value; });

  double best_norm = runs[order[0]].value;
  for (int oi = 0; oi < opts.restarts; ++oi) {
    const SimplexOut& cand = runs[order[oi]];
    if (cand.value >= 1.25) break;  // candidates are sorted; no hope further
    StateSpace g = loop_of(cand.y);
    CertifyOutcome co;
    try {
      co = antipassivity_certify(g, cls, rho, opts.nu_max, CertifyMode::Joint);
    } catch (const SolverUnknown&) {
      continue;
    }
    if (!co.certified()) continue;

    // Interleaved coefficient pass: polish under the certified filter, keep
    // the polish only if it still certifies.
    VectorXd y_best = cand.y;
    Certificate cert = *co.certificate;
    if (nfree > 0) {
      const SimplexOut polish = nelder_mead(objective_at(cert.lambda), y_best,
                                            0.1, opts.simplex_iters);
      if (polish.value < cand.value) {
        try {
          const StateSpace g2 = loop_of(polish.y);
          const CertifyOutcome co2 = antipassivity_certify(
              g2, cls, rho, opts.nu_max, CertifyMode::Joint);
          if (co2.certified() && co2.certificate->margin >= cert.margin) {
            y_best = polish.y;
            cert = *co2.certificate;
            g = g2;
          }
        } catch (const SolverUnknown&) {
        }
      }
    }

    const CoreMats m = unpack_core(vp + nsp * y_best);
    const StateSpace core = build_core(m);
    const StateSpace k = cascade(sigma_min, core);

    SynthesisResult out;
    out.mode = SynthesisMode::Structured;
    out.controller = k;
    out.subcontroller = core;
    out.lambda = cert.lambda;
    out.rho = rho;
    out.rho_log = {rho};
    out.seed = opts.seed;

    const double lres =
        core_constraint_residual(core, r, m.th12, theta22, gamma1, gamma2, phi2);
    if (lres > 1e-7 * cscale)
      throw SolverUnknown("accepted core drifted off the structural subspace");
    out.regulator_residual =
        solve_controller_regulator(k, reg.phi, reg.gamma).residual;
    if (out.regulator_residual > 1e-7 * cscale)
      throw SolverUnknown("structured controller misses the regulator equation");
    if (mask_residual(k.d, info, c) > 0.0)
      throw SolverUnknown("structured controller leaked outside the mask");
    return out;
  }
  throw NotCertified("structured local search exhausted without a certificate",
                     best_norm - 1.0);
}

SynthesisResult kron_lift(const SynthesisResult& base, const PartitionedPlant& p_base,
                          const OracleClass& cls_base, int c) {
  require(c >= 1, "target width must be positive");
  if (p_base.c != 1 || cls_base.c != 1)
    throw std::invalid_argument("lift expects width-1 base data");
  require(cls_base.s() == p_base.s, "class does not match the network blocks");

  // Fresh certificate on the base; its Lyapunov matrix lifts as M (x) I_c
  // because the filtered stack commutes entrywise with the expansion.
  const StateSpace gb = close_controller(p_base, base.controller);
  const CertifyOutcome co =
      antipassivity_certify(gb, cls_base, base.rho, base.lambda.nu_max,
                            CertifyMode::FixedLambda, &base.lambda);
  if (!co.certified())
    throw NotCertified("base certificate failed revalidation", co.deficit);

  const StateSpace gl = kron_expand(to_state_space(p_base), c);
  const PartitionedPlant pl =
      from_state_space(gl, p_base.s, c, p_base.nu() * c, p_base.ny() * c);
  const OracleClass cls_l = make_oracle_class(cls_base.m, cls_base.L, c);

  SynthesisResult out = base;
  out.controller = kron_expand(base.controller, c);
  out.subcontroller = kron_expand(base.subcontroller, c);

  // Verify the rate inequality at the lifted dimension by a single
  // eigenvalue check; no new search is run at width c.
  const StateSpace g = close_controller(pl, out.controller);
  const FilteredSystem fc =
      assemble_filtered(g, widen_degenerate(cls_l), base.rho, base.lambda.nu_max);
  const MatrixXd cc = fc.c_at(base.lambda.lambda);
  const MatrixXd dc = fc.d_at(base.lambda.lambda);
  const int nh = static_cast<int>(fc.a.rows());
  const int scl = static_cast<int>(cc.rows());
  const MatrixXd mc = kron_identity(co.certificate->lyapunov_m, c);
  MatrixXd ab(nh, nh + scl);
  ab << fc.a, fc.b;
  MatrixXd w = ab.transpose() * mc * ab;
  w.topLeftCorner(nh, nh) -= mc;
  w.topRightCorner(nh, scl) += 0.5 * cc.transpose();
  w.bottomLeftCorner(scl, nh) += 0.5 * cc;
  w.bottomRightCorner(scl, scl) += 0.5 * (dc + dc.transpose());
  const double scale =
      1.0 + std::max({max_abs(fc.a), max_abs(fc.b), max_abs(cc), max_abs(dc)});
  const Eigen::SelfAdjointEigenSolver<MatrixXd> ew(w);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> em(mc);
  if (ew.eigenvalues().maxCoeff() > -5e-8 * scale ||
      em.eigenvalues().minCoeff() < 5e-8 * scale)
    throw NotCertified("lifted certificate failed revalidation",
                       ew.eigenvalues().maxCoeff());

  const RegulatorSolution reg_l =
      solve_plant_regulator(pl, default_consensus(pl.s, c));
  out.regulator_residual =
      solve_controller_regulator(out.controller, reg_l.phi, reg_l.gamma).residual;
  const double rscale = 1.0 + max_abs(reg_l.gamma) + max_abs(reg_l.phi);
  if (out.regulator_residual > 1e-7 * rscale)
    throw NotCertified("lifted controller misses the regulator equation",
                       out.regulator_residual);
  return out;
}

}  // namespace algoforge
