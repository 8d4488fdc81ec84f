#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "algoforge/analysis.hpp"
#include "algoforge/factorization.hpp"
#include "algoforge/lti.hpp"
#include "algoforge/oracles.hpp"
#include "algoforge/regulation.hpp"

namespace algoforge {

// Admissible sparsity of a control-side feedthrough: one boolean per
// (output block, input block) of width c, nonzero = free entry. The
// quad_invariance flag records that the pattern is closed under
// X -> X (I + D2 X)^{-1}, so it survives feedthrough reinsertion
// (block-lower-triangular patterns are closed; generic ones need not be).
struct InfoStructure {
  Eigen::MatrixXi mask;
  bool quad_invariance = true;
};

InfoStructure dense_info(int out_blocks, int in_blocks);
InfoStructure lower_triangular_info(int blocks);

// Largest magnitude sitting on a masked-out entry (blocks of width c).
double mask_residual(const MatrixXd& m, const InfoStructure& info, int c);

enum class SynthesisMode { Full, Structured };

struct SynthesisResult {
  StateSpace controller;     // complete controller, measurement in, control out
  StateSpace subcontroller;  // sigma_f (full mode) or the core (structured mode)
  FilterCoefficients lambda;
  double rho = 1.0;
  SynthesisMode mode = SynthesisMode::Full;
  std::vector<double> rho_log;  // certified rates in alternation order
  double regulator_residual = 0.0;
  double feedthrough_perturbation = 0.0;
  std::uint64_t seed = 0;
};

// Psi(lam) (Sigma_{m,L} * rho-weighted (P * Sigma_full)): the performance
// channel (q, r) of width s*c comes first; the control channel has input
// [drive; u] of width s*c + nu and the measurement output of width ny.
// State order: filter registers, network, integrator bank. Degenerate
// sectors are widened; lam must be valid at rho.
PartitionedPlant build_synthesis_plant(const PartitionedPlant& p,
                                       const RegulatorSolution& reg,
                                       const OracleClass& cls, double rho,
                                       const FilterCoefficients& lam);

// Zeroes the control feedthrough and hands it back for later reinsertion.
std::pair<PartitionedPlant, MatrixXd> remove_feedthrough(const PartitionedPlant& p_hat);

// Wraps [[1, sqrt 2], [sqrt 2, 1]] (x) I around the leading q_width-wide
// input/output pair: the result has H-inf norm < 1 exactly when the original
// channel is stable and strictly antipassive (a Cayley map on the loop).
// Remaining channels pass through unchanged.
StateSpace hinf_equiv_loopshift(const StateSpace& g, int q_width);
PartitionedPlant hinf_equiv_loopshift(const PartitionedPlant& p_hat);

struct FullOrderOptions {
  double eps_rel = 1e-7;  // LMI strictness relative to the data scale
  bool quick = false;     // stop at the first feasible point (bisection probes)
  double tau_max = 1e7;
  double var_bound = 1e8;
};

// Convex output-feedback design on a loop-shifted plant with zero control
// feedthrough: the two-block (X, Y) change of variables renders the
// closed-loop bounded-real inequality affine in the transformed controller
// data, masked feedthrough entries are pinned to zero (the transform leaves
// the controller feedthrough untouched, so the pattern is exact), and the
// controller of order = plant order is read back from an interior point.
StateSpace full_order_step(const PartitionedPlant& p0, const InfoStructure& info,
                           const FullOrderOptions& opts = FullOrderOptions());

struct ReinsertedController {
  StateSpace sigma_f;
  double perturbation = 0.0;  // diagonal bump applied to the feedthrough
};

// Controller for the original plant from the zero-feedthrough design: the
// design in feedback with d_hat_2 on its own measurement. Closed loops of
// (plant, sigma_f) and (zeroed plant, sigma_f0) coincide.
ReinsertedController reinsert_feedthrough(const StateSpace& sigma_f0,
                                          const MatrixXd& d_hat_2);

struct AlternationOptions {
  int nu_max = 3;
  double rho_lo = 0.05;
  double rho_hi = 0.99;
  int max_iters = 10;
  double tol = 1e-3;         // stop once the certified rate improves less
  double bisect_tol = 2e-3;  // rate resolution of the synthesis bisection
};

// Alternates (i) rate bisection over the full-order pipeline at fixed filter
// coefficients with (ii) joint-coefficient re-analysis of the resulting
// controller. The logged certified rates are nonincreasing. The final result
// carries a fresh fixed-coefficient certificate, satisfies the regulator
// equation through the integrator bank, and (when the information structure
// renders the loop executable) passes a simulation decay envelope.
SynthesisResult alternate_synthesis(const PartitionedPlant& p, const OracleClass& cls,
                                    const InfoStructure& info,
                                    const AlternationOptions& opts = AlternationOptions());

struct StructuredOptions {
  int nu_max = 3;
  int restarts = 20;
  std::uint64_t seed = 1;
  int simplex_iters = 400;  // Nelder-Mead budget per restart
};

// Derivative-free multi-start search over the affine family of core
// subcontrollers tied to (reg, theta22) and the defect coupling theta12,
// minimizing the loop-shifted H-inf norm at the given rate with interleaved
// coefficient re-optimization; a candidate is accepted only when a fresh
// joint certificate exists. The controller is the integrator bank in cascade
// with the core; masked feedthrough entries stay zero throughout.
SynthesisResult structured_synthesis(const PartitionedPlant& p,
                                     const RegulatorSolution& reg,
                                     const MatrixXd& theta22, const InfoStructure& info,
                                     const OracleClass& cls, double rho,
                                     const StructuredOptions& opts = StructuredOptions());

// Kronecker lift of a width-1 design to block width c, with the certificate
// re-validated on the lifted network at the same rate and coefficients.
SynthesisResult kron_lift(const SynthesisResult& base, const PartitionedPlant& p_base,
                          const OracleClass& cls_base, int c);

}  // namespace algoforge
