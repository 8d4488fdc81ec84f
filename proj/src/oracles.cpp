#include "algoforge/oracles.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

OracleClass make_oracle_class(VectorXd m, VectorXd L, int c) {
  require(m.size() == L.size() && m.size() > 0, "class needs matching m and L lists");
  require(c >= 1, "block dimension must be positive");
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    require(std::isfinite(m(i)), "lower sector bounds must be finite");
    require(m(i) <= L(i), "sector bounds need m <= L");
  }
  return OracleClass{std::move(m), std::move(L), c};
}

double sector_sigma(double m, double L) {
  return std::isinf(L) ? 0.0 : 1.0 / (L - m);
}

double sector_sigma_l(double m, double L) {
  return std::isinf(L) ? 1.0 : L / (L - m);
}

OracleClass widen_degenerate(const OracleClass& k, double rel) {
  OracleClass out = k;
  for (Eigen::Index i = 0; i < out.m.size(); ++i)
    if (out.L(i) == out.m(i)) out.L(i) = out.m(i) + rel * (1.0 + std::abs(out.m(i)));
  return out;
}

bool is_quadratic(const BlockOracle& f) {
  return std::holds_alternative<GeneralQuadratic>(f) ||
         std::holds_alternative<TestQuadratic>(f) ||
         std::holds_alternative<ZeroOracle>(f);
}

double oracle_value(const BlockOracle& f, const VectorXd& v) {
  const double boundary_tol = 1e-9 * (1.0 + v.cwiseAbs().maxCoeff());
  if (const auto* q = std::get_if<GeneralQuadratic>(&f)) {
    const VectorXd e = v - q->beta0;
    return 0.5 * e.dot(q->q * e);
  }
  if (const auto* t = std::get_if<TestQuadratic>(&f))
    return 0.5 * t->m * v.squaredNorm() + t->b.dot(v);
  if (const auto* l = std::get_if<L1BallIndicator>(&f))
    return v.lpNorm<1>() <= l->radius + boundary_tol ? 0.0 : kInf;
  if (const auto* b = std::get_if<BoxIndicator>(&f)) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (v(i) < b->lo(i) - boundary_tol || v(i) > b->hi(i) + boundary_tol) return kInf;
    return 0.0;
  }
  if (const auto* s = std::get_if<ScaledL1>(&f)) return s->weight * v.lpNorm<1>();
  return 0.0;  // ZeroOracle
}

VectorXd eval_subgradient(const BlockOracle& f, const VectorXd& v) {
  const double tol = 1e-12 * (1.0 + v.cwiseAbs().maxCoeff());
  if (const auto* q = std::get_if<GeneralQuadratic>(&f)) return q->q * (v - q->beta0);
  if (const auto* t = std::get_if<TestQuadratic>(&f)) return t->m * v + t->b;
  if (const auto* l = std::get_if<L1BallIndicator>(&f)) {
    if (v.lpNorm<1>() >= l->radius - tol)
      throw NotSingleValued("normal cone of the ball is set-valued on the boundary");
    return VectorXd::Zero(v.size());
  }
  if (const auto* b = std::get_if<BoxIndicator>(&f)) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (v(i) <= b->lo(i) + tol || v(i) >= b->hi(i) - tol)
        throw NotSingleValued("normal cone of the box is set-valued on the boundary");
    return VectorXd::Zero(v.size());
  }
  if (const auto* s = std::get_if<ScaledL1>(&f)) {
    VectorXd g(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) <= tol)
        throw NotSingleValued("l1 subdifferential is an interval at zero coordinates");
      g(i) = v(i) > 0 ? s->weight : -s->weight;
    }
    return g;
  }
  return VectorXd::Zero(v.size());  // ZeroOracle
}

VectorXd soft_threshold(const VectorXd& v, double t) {
  VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out(i) = std::copysign(std::max(std::abs(v(i)) - t, 0.0), v(i));
  return out;
}

VectorXd project_l1_ball(const VectorXd& v, double radius) {
  require(radius >= 0.0, "ball radius must be nonnegative");
  if (v.lpNorm<1>() <= radius) return v;
  // Sort-based exact projection: threshold chosen so the shrunk vector lands on
  // the sphere of the given radius.
  std::vector<double> u(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = std::abs(v(i));
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  for (size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double cand = (cum - radius) / static_cast<double>(j + 1);
    if (j + 1 == u.size() || u[j + 1] <= cand) {
      theta = cand;
      break;
    }
  }
  return soft_threshold(v, theta);
}

VectorXd project_box(const VectorXd& v, const VectorXd& lo, const VectorXd& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

namespace {

// Set-valued blocks only couple through scalar multiples of the identity; this
// recovers delta and rejects anything else.
double scalar_coupling(const MatrixXd& d) {
  const Eigen::Index n = d.rows();
  const double delta = d.trace() / static_cast<double>(n);
  const double dev = max_abs(d - delta * MatrixXd::Identity(n, n));
  if (dev > 1e-9 * (1.0 + std::abs(delta)))
    throw std::invalid_argument(
        "set-valued blocks require identity-scaled self-coupling");
  return delta;
}

VectorXd prox(const BlockOracle& f, double gamma, const VectorXd& v) {
  if (const auto* l = std::get_if<L1BallIndicator>(&f))
    return project_l1_ball(v, l->radius);
  if (const auto* b = std::get_if<BoxIndicator>(&f)) return project_box(v, b->lo, b->hi);
  const auto& s = std::get<ScaledL1>(f);
  return soft_threshold(v, gamma * s.weight);
}

}  // namespace

VectorXd eval_yosida(const BlockOracle& f, const MatrixXd& d, const VectorXd& v) {
  require(d.rows() == v.size() && d.cols() == v.size(),
          "self-coupling block must match the input dimension");
  const Eigen::Index n = v.size();
  if (std::holds_alternative<ZeroOracle>(f)) return VectorXd::Zero(n);
  if (const auto* q = std::get_if<GeneralQuadratic>(&f)) {
    // (I - d q) u = v - d q beta0, then w = q (u - beta0).
    const MatrixXd lhs = MatrixXd::Identity(n, n) - d * q->q;
    if (cond_2(lhs) >= 1e12)
      throw WellPosednessViolated("quadratic coupling is numerically singular");
    const VectorXd u = Eigen::PartialPivLU<MatrixXd>(lhs).solve(v - d * (q->q * q->beta0));
    return q->q * (u - q->beta0);
  }
  if (const auto* t = std::get_if<TestQuadratic>(&f)) {
    const MatrixXd lhs = MatrixXd::Identity(n, n) - t->m * d;
    if (cond_2(lhs) >= 1e12)
      throw WellPosednessViolated("quadratic coupling is numerically singular");
    const VectorXd u = Eigen::PartialPivLU<MatrixXd>(lhs).solve(v + d * t->b);
    return t->m * u + t->b;
  }
  const double delta = scalar_coupling(d);
  if (std::abs(delta) < 1e-14) return eval_subgradient(f, v);
  if (delta > 0.0)
    throw WellPosednessViolated(
        "set-valued blocks need negative self-coupling for a single-valued resolvent");
  const double gamma = -delta;
  const VectorXd z = prox(f, gamma, v);
  return (v - z) / gamma;
}

VectorXd eval_yosida_shifted(const BlockOracle& f, const MatrixXd& d, const VectorXd& v,
                             const VectorXd& beta_star, const VectorXd& g_star) {
  return eval_yosida(f, d, v + beta_star - d * g_star) - g_star;
}

bool yosida_well_posed(double m, double L, const MatrixXd& d) {
  if (L == m) L = m + 1e-3 * (1.0 + std::abs(m));
  const Eigen::Index n = d.rows();
  MatrixXd test;
  if (std::isinf(L)) {
    test = d + d.transpose() - 2.0 * m * d.transpose() * d;
  } else {
    const double sg = sector_sigma(m, L), sgl = sector_sigma_l(m, L);
    const MatrixXd x =
        (sgl * d - sg * MatrixXd::Identity(n, n)).transpose() *
        (MatrixXd::Identity(n, n) - m * d);
    test = x + x.transpose();
  }
  const double lmax =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(test).eigenvalues().maxCoeff();
  return lmax < -1e-12 * (1.0 + max_abs(test));
}

}  // namespace algoforge
