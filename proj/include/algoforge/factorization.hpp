#pragma once

#include "algoforge/lti.hpp"
#include "algoforge/regulation.hpp"

namespace algoforge {

// Orthonormal defect basis split against the steady measurement map: the first
// r columns span null(phi), the rest its orthogonal complement.
struct DefectBasis {
  MatrixXd r_basis;
  int r = 0;
};
DefectBasis defect_basis(const MatrixXd& phi);

struct FactorizationResult {
  StateSpace sigma_min;   // integrator bank with the -Gamma1 read-out
  StateSpace sigma_core;  // outputs stacked as [drive row; control rows]
  int r = 0;              // integrator count, dim null(phi)
  MatrixXd theta12, theta22;
  MatrixXd r_basis, q_basis;
  MatrixXd gamma1, gamma2, phi2;
};

// Split a controller into an internal model driven by a core subcontroller:
// cascade(sigma_min, sigma_core) reproduces k up to the state bases R and Q.
// theta must solve the controller regulator equation for (gamma, phi).
FactorizationResult factorize(const StateSpace& k, const MatrixXd& theta,
                              const MatrixXd& gamma, const MatrixXd& phi);

// Residual of the affine subspace tying a core subcontroller to the regulator
// data; core outputs are split after the first r rows.
double core_constraint_residual(const StateSpace& core, int r,
                                const MatrixXd& theta12, const MatrixXd& theta22,
                                const MatrixXd& gamma1, const MatrixXd& gamma2,
                                const MatrixXd& phi2);

// One-state-per-coordinate controllers over the memoryless exchange whose core
// is static: D entries split as a column profile plus a row profile.
struct StaticCoreParams {
  double b0 = 0.0;
  VectorXd b1, b2;  // s entries each; gauge b1 += t, b2 -= t is neutral
};

StateSpace static_core_build(const StaticCoreParams& p, int s, int c,
                             bool lower_triangular);

// Defect coupling of the static family in the natural defect coordinates
// (consensus direction first): -b2' N^a (x) I_c.
MatrixXd static_core_theta12(const StaticCoreParams& p, int s, int c);

// Recover (b0, b1, b2) from a one-state-per-coordinate controller, gauge-fixed
// by b1[0] = 0 (b2 = 0 when s = 1). Throws NotInFamily with the deviation.
StaticCoreParams static_core_identify(const KroneckerSystem& g);

// Integrator bank of width cs with the regulator maps on its boundary; closing
// it against any subcontroller yields a controller satisfying the regulator
// equation with theta = [-I; 0].
StateSpace build_sigma_full(const MatrixXd& gamma, const MatrixXd& phi);

// Number of [drive; control] input groups the subcontroller feeds back.
struct CoreFromFull {
  StateSpace core;
  int r = 0;
  MatrixXd theta12, theta22;
};

// Rewrite a full-order design as a core subcontroller in the affine subspace
// of the reduced model; transfer functions of the two cascades agree.
CoreFromFull full_to_core(const StateSpace& sigma_f, const MatrixXd& gamma,
                          const MatrixXd& phi, const DefectBasis& basis);

// Lift a core subcontroller to a full-order design. The lift pins the free
// gain to the pseudoinverse of phi2 so the auxiliary dynamics are deadbeat.
StateSpace core_to_full(const StateSpace& core, int r, const MatrixXd& theta12,
                        const MatrixXd& theta22, const MatrixXd& phi2,
                        const DefectBasis& basis);

}  // namespace algoforge
