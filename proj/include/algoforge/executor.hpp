#pragma once

#include <vector>

#include "algoforge/lti.hpp"
#include "algoforge/oracles.hpp"

namespace algoforge {

// An algorithm is a linear recursion in feedback with one oracle per block. The
// feedthrough must be block lower triangular so each step resolves by forward
// substitution; diagonal blocks couple through the resolvent-type evaluation.
struct AlgorithmSystem {
  StateSpace g;  // inputs w (s*c), outputs z (s*c)
  std::vector<BlockOracle> oracles;
  OracleClass cls;

  int s() const { return cls.s(); }
  int c() const { return cls.c; }
};

AlgorithmSystem make_algorithm(StateSpace g, std::vector<BlockOracle> oracles,
                               OracleClass cls);

bool is_block_lower_triangular(const MatrixXd& d, int s, int c, double tol = 1e-9);

struct WellPosedReport {
  std::vector<bool> blocks;
  bool all = true;
};
WellPosedReport check_well_posed(const AlgorithmSystem& alg);

struct Trajectory {
  MatrixXd x;     // (steps+1) x n, row k = x_k
  MatrixXd w, z;  // steps x (s*c)
  bool diverged = false;

  int steps() const { return static_cast<int>(w.rows()); }
};

struct SimulateOptions {
  int steps = 200;
  double divergence_threshold = 1e12;
};

Trajectory simulate(const AlgorithmSystem& alg, const VectorXd& x0,
                    const SimulateOptions& opts = {});

struct FixedPoint {
  VectorXd x, w, z;
};

// Fixed point of the coupled affine system; only quadratic/zero blocks qualify.
FixedPoint solve_fixed_point_quadratic(const AlgorithmSystem& alg);

// Residual of (x, w) as a fixed point: max of the state defect and the defect of
// w against a recomputed forward-substitution sweep at state x.
double fixed_point_residual(const AlgorithmSystem& alg, const VectorXd& x,
                            const VectorXd& w);

// Geometric rate fitted on the tail of |x_k - x*|; NonConvergent when the
// trajectory diverged or shows no decay.
double measure_rate(const Trajectory& traj, const VectorXd& x_star);

struct ErrorSignals {
  MatrixXd z_err, w_err;  // rows follow trajectory steps
};
ErrorSignals error_signals(const Trajectory& traj, const VectorXd& beta_star,
                           const VectorXd& w_star);

// Relabel oracle blocks; valid only when the permuted feedthrough stays block
// lower triangular.
AlgorithmSystem permute_blocks(const AlgorithmSystem& alg, const std::vector<int>& perm);

}  // namespace algoforge
