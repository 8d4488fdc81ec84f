#pragma once

#include "algoforge/lti.hpp"
#include "algoforge/oracles.hpp"

namespace algoforge {

// Disagreement directions: columns sum to zero and are independent.
MatrixXd default_consensus(int s, int c);  // [I_{s-1}; -1'] (x) I_c
void validate_consensus(const MatrixXd& n_cons, int s, int c);

struct RegulatorSolution {
  MatrixXd pi, gamma, phi;
  double residual = 0.0;
};

// Steady-state maps (Pi, Gamma) solving
//   A Pi + [0, B1 N] + B2 Gamma = Pi,
//   C1 Pi + [1_s (x) I_c, D1 N] + D12 Gamma = 0,
// with Phi read off the measurement row. Infeasible when the least-squares
// residual exceeds 1e-7 * (1 + data scale); Gamma and Phi are unique whenever
// [A - I, B2; C1, D12] has full column rank.
RegulatorSolution solve_plant_regulator(const PartitionedPlant& p, const MatrixXd& n_cons);

struct ControllerRegulator {
  MatrixXd theta;
  double residual = 0.0;
};

// Theta with Ac Theta + Bc Phi = Theta and Cc Theta + Dc Phi = Gamma; Infeasible
// when no solution exists within 1e-8 * scale.
ControllerRegulator solve_controller_regulator(const StateSpace& k, const MatrixXd& phi,
                                               const MatrixXd& gamma);

// Change of disagreement basis N -> N W rebases a solution by blkdiag(I_c, W).
RegulatorSolution rebase_consensus(const RegulatorSolution& sol, const MatrixXd& w, int c);

// Closure of an algorithm's oracle channel over the linear means w = m z.
MatrixXd close_quadratic(const StateSpace& g, const VectorXd& m, int c);

// Plant closed over the mean slopes, mapping [x; d; u] -> [x+; e; y] where the
// defect input d stacks (consensus, disagreement) directions of width s*c.
struct MeanClosure {
  MatrixXd a, b_exo, b2;
  MatrixXd c_e, d_e_exo, d_e2;
  MatrixXd c_y, d_y_exo, d_y2;
};
MeanClosure close_plant_mean(const PartitionedPlant& p, const VectorXd& m,
                             const MatrixXd& n_cons);

struct AssumptionReport {
  bool mean_nonzero = false;       // sum of slopes away from zero
  bool loop_invertible = false;    // I - D1 m well conditioned
  bool stabilizable = false;       // (A^m, B2^m)
  bool detectable = false;         // (A^m, C2^m)
  bool regulator_rank = false;     // [A - I, B2; C1, D12] full column rank
  bool composite_detectable = false;  // defect-augmented pair

  bool all() const {
    return mean_nonzero && loop_invertible && stabilizable && detectable &&
           regulator_rank && composite_detectable;
  }
};
AssumptionReport check_assumptions(const PartitionedPlant& p, const VectorXd& m,
                                   const MatrixXd& n_cons);

// Memoryless exchange: z = u, y = w.
PartitionedPlant make_direct_plant(int s, int c);

// Two-block channel: z = u, y1 = the h-step alpha-leaky delay of w1, y2 = w2.
PartitionedPlant make_channel_plant(double alpha, int h, int c);

// Two-block delay network: z1 = u1 delayed h_w steps, y1 = w1 delayed h_z steps,
// z2 = u2, y2 = w2.
PartitionedPlant make_delay_network(int h_z, int h_w, int c);

// Lower bound on the number of controller states needed for regulation with an
// information pattern of rank r_info.
int order_bound(const MatrixXd& gamma, const MatrixXd& phi, int r_info, int n_y);

// Information rank of block-lower-triangular patterns: one block per unbounded
// sector (L_i = inf).
int blt_info_rank(const OracleClass& cls);

struct EncodingReport {
  bool range_ok = false;  // ran [B N, 0; D N, -1] inside ran [I - A; -C]
  bool null_ok = false;   // null [A - I, B] inside null [N' C, N' D; 0, 1']
};

// Fixed-point-encoding containments for a controller base over a memoryless
// exchange, evaluated on the base realization with the base disagreement
// directions n_base (s x (s-1)).
EncodingReport check_fixed_point_encoding(const KroneckerSystem& k, const MatrixXd& n_base);

struct RegulationCheck {
  bool schur = false;
  bool regulated = false;
  MatrixXd upsilon;        // steady state per unit defect, (I - A)^{-1} B
  double residual = 0.0;   // max abs of C Upsilon + D
};

// A closed loop driven by a constant defect regulates its error output iff the
// dynamics are Schur and the steady-state error map vanishes.
RegulationCheck nominal_regulation_check(const StateSpace& g, double tol = 1e-8);

}  // namespace algoforge
