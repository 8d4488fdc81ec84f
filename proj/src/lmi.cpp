#include "algoforge/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

void check_symmetric(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols())
    throw MalformedProblem(std::string(what) + ": matrix is not square");
  if (max_abs(m - m.transpose()) > 1e-9 * (1.0 + max_abs(m)))
    throw MalformedProblem(std::string(what) + ": matrix is not symmetric");
}

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double lambda_max(const MatrixXd& s) {
  if (s.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

int SymBlock::var(int i, int j) const {
  if (i > j) std::swap(i, j);
  if (i < 0 || j >= dim)
    throw MalformedProblem("symmetric block index out of range");
  return offset + j * (j + 1) / 2 + i;
}

SymExpr::SymExpr(int dim) : dim_(dim) {
  if (dim < 1) throw MalformedProblem("expression dimension must be positive");
  constant_ = MatrixXd::Zero(dim, dim);
}

void SymExpr::add_constant(const MatrixXd& f0) {
  if (f0.rows() != dim_ || f0.cols() != dim_)
    throw MalformedProblem("constant term has the wrong dimension");
  check_symmetric(f0, "constant term");
  constant_ += symmetrize(f0);
}

void SymExpr::add_term(int var, const MatrixXd& coeff) {
  if (var < 0) throw MalformedProblem("negative variable index");
  if (coeff.rows() != dim_ || coeff.cols() != dim_)
    throw MalformedProblem("coefficient has the wrong dimension");
  check_symmetric(coeff, "coefficient");
  auto [it, inserted] = terms_.try_emplace(var, MatrixXd::Zero(dim_, dim_));
  it->second += symmetrize(coeff);
  (void)inserted;
}

void SymExpr::add_congruence(const SymBlock& block, const MatrixXd& w, double sign) {
  if (w.rows() != block.dim || w.cols() != dim_)
    throw MalformedProblem("congruence map has the wrong dimension");
  for (int p = 0; p < block.dim; ++p) {
    for (int q = p; q < block.dim; ++q) {
      const MatrixXd outer = w.row(p).transpose() * w.row(q);
      const MatrixXd coeff =
          (p == q) ? outer : MatrixXd(outer + outer.transpose());
      add_term(block.var(p, q), sign * coeff);
    }
  }
}

MatrixXd SymExpr::value(const VectorXd& x) const {
  MatrixXd s = constant_;
  for (const auto& [var, coeff] : terms_) {
    if (var >= x.size())
      throw MalformedProblem("expression references a variable outside the problem");
    s += x(var) * coeff;
  }
  return s;
}

int LmiProblem::add_scalar() { return var_count_++; }

SymBlock LmiProblem::add_symmetric(int dim) {
  if (dim < 1) throw MalformedProblem("symmetric block dimension must be positive");
  SymBlock b{dim, var_count_};
  var_count_ += b.var_count();
  return b;
}

void LmiProblem::require_negative(const SymExpr& expr, double eps) {
  if (!(eps >= 0.0)) throw MalformedProblem("constraint slack must be nonnegative");
  if (!expr.terms().empty() && expr.terms().rbegin()->first >= var_count_)
    throw MalformedProblem("constraint references an unregistered variable");
  constraints_.push_back(expr);
  eps_.push_back(eps);
}

void LmiProblem::require_positive(const SymExpr& expr, double eps) {
  SymExpr neg(expr.dim());
  neg.add_constant(-expr.constant());
  for (const auto& [var, coeff] : expr.terms()) neg.add_term(var, -coeff);
  require_negative(neg, eps);
}

double LmiProblem::point_margin(const VectorXd& x) const {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < constraints_.size(); ++l)
    margin = std::min(margin, -lambda_max(constraints_[l].value(x)) - eps_[l]);
  return margin;
}

MatrixXd LmiProblem::unpack(const SymBlock& block, const VectorXd& x) {
  MatrixXd m(block.dim, block.dim);
  for (int i = 0; i < block.dim; ++i)
    for (int j = i; j < block.dim; ++j) {
      const int v = block.var(i, j);
      if (v >= x.size())
        throw MalformedProblem("block lies outside the solution vector");
      m(i, j) = m(j, i) = x(v);
    }
  return m;
}

namespace {

// One constraint in shifted form W(x, t) = t I - (S(x) + eps I), kept positive
// definite throughout the phase-I minimization of t.
struct ConstraintWork {
  std::vector<int> vars;
  std::vector<const MatrixXd*> coeffs;
  MatrixXd shifted_constant;

  MatrixXd shifted(const VectorXd& x) const {
    MatrixXd s = shifted_constant;
    for (std::size_t k = 0; k < vars.size(); ++k) s += x(vars[k]) * (*coeffs[k]);
    return s;
  }
};

}  // namespace

LmiResult LmiProblem::solve(const LmiOptions& opts) const {
  LmiResult res;
  res.x = VectorXd::Zero(var_count_);
  res.lower_bound = -std::numeric_limits<double>::infinity();
  if (constraints_.empty()) {
    res.status = LmiStatus::Feasible;
    res.margin = std::numeric_limits<double>::infinity();
    return res;
  }
  const int d = var_count_;
  if (d == 0) {
    res.margin = point_margin(res.x);
    res.status = res.margin >= 0.0 ? LmiStatus::Feasible : LmiStatus::Infeasible;
    res.lower_bound = -res.margin;
    return res;
  }

  double m_total = 0.0;
  std::vector<ConstraintWork> work(constraints_.size());
  for (std::size_t l = 0; l < constraints_.size(); ++l) {
    const int n = constraints_[l].dim();
    for (const auto& [var, coeff] : constraints_[l].terms()) {
      work[l].vars.push_back(var);
      work[l].coeffs.push_back(&coeff);
    }
    work[l].shifted_constant =
        constraints_[l].constant() + eps_[l] * MatrixXd::Identity(n, n);
    m_total += n;
  }

  // Box barriers on x and a floor on t bound the domain; without them the
  // log-det terms are unbounded below whenever the feasible set is unbounded
  // and the central path need not exist.
  const double r_box = opts.var_bound;
  m_total += 2.0 * d + 1.0;

  VectorXd x = VectorXd::Zero(d);
  double t = 0.0;
  for (const auto& cw : work) t = std::max(t, lambda_max(cw.shifted(x)));
  t += 0.1 * (1.0 + std::abs(t));

  // phi(x, t) = tau t - sum_l log det(t I - S~_l(x))
  //             - sum_j [log(R - x_j) + log(R + x_j)] - log(t + 1);
  // the domain flag reports whether the point is strictly inside.
  auto barrier = [&](const VectorXd& xx, double tt, double tau, bool& ok) {
    ok = false;
    if (tt <= -1.0 || xx.cwiseAbs().maxCoeff() >= r_box) return 0.0;
    double phi = tau * tt - std::log(tt + 1.0);
    for (int j = 0; j < d; ++j)
      phi -= std::log(r_box - xx(j)) + std::log(r_box + xx(j));
    for (const auto& cw : work) {
      const int n = static_cast<int>(cw.shifted_constant.rows());
      MatrixXd w = tt * MatrixXd::Identity(n, n) - cw.shifted(xx);
      Eigen::LLT<MatrixXd> llt(w);
      if (llt.info() != Eigen::Success) return 0.0;
      phi -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
    ok = true;
    return phi;
  };

  const int tvar = d;
  double tau = opts.tau0;
  bool have_feasible = false;
  double best_margin = -std::numeric_limits<double>::infinity();
  double stage_margin = -std::numeric_limits<double>::infinity();
  VectorXd best_x;
  while (true) {
    bool centered = false;
    for (int it = 0; it < opts.newton_max; ++it) {
      VectorXd g = VectorXd::Zero(d + 1);
      MatrixXd h = MatrixXd::Zero(d + 1, d + 1);
      g(tvar) = tau - 1.0 / (t + 1.0);
      h(tvar, tvar) = 1.0 / ((t + 1.0) * (t + 1.0));
      for (int j = 0; j < d; ++j) {
        const double lo = r_box + x(j), hi = r_box - x(j);
        g(j) += 1.0 / hi - 1.0 / lo;
        h(j, j) += 1.0 / (hi * hi) + 1.0 / (lo * lo);
      }
      bool domain_ok = true;
      for (const auto& cw : work) {
        const int n = static_cast<int>(cw.shifted_constant.rows());
        MatrixXd w = t * MatrixXd::Identity(n, n) - cw.shifted(x);
        Eigen::LLT<MatrixXd> llt(w);
        if (llt.info() != Eigen::Success) {
          domain_ok = false;
          break;
        }
        MatrixXd winv = llt.solve(MatrixXd::Identity(n, n));
        winv = symmetrize(winv);
        // P_a = W^{-1} F_a per active variable; the slack enters as F_t = -I.
        const int na = static_cast<int>(cw.vars.size());
        std::vector<MatrixXd> p(na + 1);
        std::vector<int> idx(na + 1);
        for (int k = 0; k < na; ++k) {
          p[k] = winv * (*cw.coeffs[k]);
          idx[k] = cw.vars[k];
        }
        p[na] = -winv;
        idx[na] = tvar;
        for (int a = 0; a <= na; ++a) {
          g(idx[a]) += p[a].trace();
          for (int b = a; b <= na; ++b) {
            const double hab = p[a].cwiseProduct(p[b].transpose()).sum();
            h(idx[a], idx[b]) += hab;
            if (a != b) h(idx[b], idx[a]) += hab;
          }
        }
      }
      if (!domain_ok) break;

      VectorXd dy;
      const double hscale = h.diagonal().cwiseAbs().maxCoeff() + 1.0;
      double mu = 0.0;
      bool have_dir = false;
      for (int tries = 0; tries < 30 && !have_dir; ++tries) {
        Eigen::LDLT<MatrixXd> ldlt(
            MatrixXd(h + mu * MatrixXd::Identity(d + 1, d + 1)));
        if (ldlt.info() == Eigen::Success) {
          dy = ldlt.solve(-g);
          if (dy.allFinite() && g.dot(dy) < 0.0) have_dir = true;
        }
        if (!have_dir) mu = (mu == 0.0) ? 1e-10 * hscale : mu * 10.0;
      }
      if (!have_dir) break;

      const double decr = -g.dot(dy);
      bool ok0 = true;
      const double phi0 = barrier(x, t, tau, ok0);
      double step = 1.0;
      bool moved = false;
      while (step >= 1e-14) {
        const VectorXd xn = x + step * dy.head(d);
        const double tn = t + step * dy(tvar);
        bool okn = false;
        const double phin = barrier(xn, tn, tau, okn);
        if (okn && phin <= phi0 - 0.25 * step * decr) {
          x = xn;
          t = tn;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      ++res.iterations;
      if (!moved) break;
      if (t < 0.0) {
        const double margin = point_margin(x);
        if (margin >= 0.0) {
          if (opts.stop_at_feasible) {
            res.status = LmiStatus::Feasible;
            res.x = x;
            res.margin = margin;
            return res;
          }
          if (margin > best_margin) {
            best_margin = margin;
            best_x = x;
            have_feasible = true;
          }
        }
      }
      if (0.5 * decr < opts.newton_tol) {
        centered = true;
        break;
      }
    }
    // Near the tau-central point the optimal slack sits within m/tau of t;
    // the factor 2 absorbs inexact centering. A positive bound proves that
    // no strictly feasible point exists inside the variable box.
    if (centered)
      res.lower_bound = std::max(res.lower_bound, t - 2.0 * m_total / tau);
    if (res.lower_bound > 0.0) {
      res.status = LmiStatus::Infeasible;
      res.x = x;
      res.margin = point_margin(x);
      return res;
    }
    if (tau >= opts.tau_max) break;
    if (have_feasible) {
      // Stage-over-stage margin saturation: further centering buys < 1%.
      if (best_margin - stage_margin < 0.01 * best_margin) break;
      stage_margin = best_margin;
    }
    tau *= opts.tau_mult;
  }
  if (have_feasible) {
    res.status = LmiStatus::Feasible;
    res.x = best_x;
    res.margin = best_margin;
    return res;
  }
  res.status = LmiStatus::Unknown;
  res.x = x;
  res.margin = point_margin(x);
  return res;
}

}  // namespace algoforge
