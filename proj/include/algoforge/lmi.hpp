#pragma once

#include <map>
#include <vector>

#include "algoforge/numeric.hpp"

namespace algoforge {

// Semidefinite feasibility problems over a flat vector of scalar decision
// variables. Symmetric matrix variables are registered as contiguous ranges
// of scalars (upper triangle, column-major); every constraint is an affine
// symmetric-matrix expression required to be negative definite with a
// per-constraint slack. Affinity holds by construction: expressions are
// stored directly as a constant plus one symmetric coefficient per variable.

// Handle for a symmetric matrix variable inside an LmiProblem.
struct SymBlock {
  int dim = 0;
  int offset = 0;  // index of the first scalar in the flat variable vector

  // Flat index of entry (i, j); order-independent.
  int var(int i, int j) const;
  int var_count() const { return dim * (dim + 1) / 2; }
};

// Affine symmetric expression sum_j x_j * F_j + F_0 of a fixed dimension.
class SymExpr {
 public:
  explicit SymExpr(int dim);

  int dim() const { return dim_; }
  void add_constant(const MatrixXd& f0);
  // Adds coeff * x_var. coeff must be symmetric (symmetrized on entry).
  void add_term(int var, const MatrixXd& coeff);
  // Adds sign * w^T M w where M is the matrix variable behind `block` and
  // w maps expression coordinates into block coordinates (block.dim x dim).
  void add_congruence(const SymBlock& block, const MatrixXd& w, double sign = 1.0);

  MatrixXd value(const VectorXd& x) const;
  const MatrixXd& constant() const { return constant_; }
  const std::map<int, MatrixXd>& terms() const { return terms_; }

 private:
  int dim_;
  MatrixXd constant_;
  std::map<int, MatrixXd> terms_;
};

enum class LmiStatus { Feasible, Infeasible, Unknown };

struct LmiResult {
  LmiStatus status = LmiStatus::Unknown;
  VectorXd x;
  // Smallest eigenvalue margin over all constraints at x: min_l of
  // (-lambda_max(S_l(x)) - eps_l). Nonnegative iff x is feasible; when
  // infeasible this is the (negative of the) best deficit reached.
  double margin = 0.0;
  // Certified lower bound on the optimal slack; positive proves infeasibility.
  double lower_bound = 0.0;
  int iterations = 0;
};

struct LmiOptions {
  double tau0 = 1.0;
  double tau_mult = 8.0;
  double tau_max = 1e10;
  int newton_max = 60;
  double newton_tol = 1e-9;
  // Every scalar variable is confined to [-var_bound, var_bound] so the
  // barrier domain is bounded and the central path exists.
  double var_bound = 1e8;
  // When false, keep centering past the first strictly feasible point and
  // return the best-margin iterate found (interior points condition any
  // downstream matrix reconstruction).
  bool stop_at_feasible = true;
};

// Feasibility of {x : S_l(x) + eps_l I <= 0 for all l} via a slack-variable
// barrier method. Verdicts are sound: Feasible is re-verified by direct
// eigenvalue computation and Infeasible is backed by a duality-style lower
// bound on the achievable slack (over the variable box); everything else is
// Unknown.
class LmiProblem {
 public:
  int add_scalar();
  SymBlock add_symmetric(int dim);
  // Appends the constraint expr + eps I < 0 (negative definite).
  void require_negative(const SymExpr& expr, double eps);
  // Appends expr - eps I > 0 as -(expr) + eps I < 0.
  void require_positive(const SymExpr& expr, double eps);

  int var_count() const { return var_count_; }
  int constraint_count() const { return static_cast<int>(constraints_.size()); }

  // Margin of a candidate point: min_l (-lambda_max(S_l(x)) - eps_l).
  double point_margin(const VectorXd& x) const;

  LmiResult solve(const LmiOptions& opts = LmiOptions()) const;

  static MatrixXd unpack(const SymBlock& block, const VectorXd& x);

 private:
  int var_count_ = 0;
  std::vector<SymExpr> constraints_;
  std::vector<double> eps_;
};

}  // namespace algoforge
