#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "algoforge/executor.hpp"
#include "algoforge/lmi.hpp"
#include "algoforge/lti.hpp"
#include "algoforge/oracles.hpp"

namespace algoforge {

// Convolution multiplier coefficients, one row per oracle block: row i holds
// lambda^i_0 .. lambda^i_{nu_max}. Valid multipliers at rate rho satisfy
// sum_nu rho^-nu lambda^i_nu > 0 and lambda^i_nu <= 0 for nu >= 1; the
// identity (lambda_0 = 1, rest 0) is always valid.
struct FilterCoefficients {
  MatrixXd lambda;  // s x (nu_max + 1)
  int nu_max = 0;
};

FilterCoefficients identity_filter(int s, int nu_max);
bool filter_valid(const FilterCoefficients& lam, double rho, double tol = 0.0);

// Coefficients induced by averaging weights mu (s x (nu_max+1)) with
// mu_0 > 0 and mu_nu >= 0: lambda_0 = sum_nu mu_nu, lambda_nu = -rho^nu mu_nu
// for nu >= 1. Always valid at rate rho.
FilterCoefficients filter_from_averaging(const MatrixXd& mu, double rho);

// Block-diagonal FIR filter realizing Psi^i(z) = sum_nu lambda^i_nu z^-nu on
// each block of width c (shift-register states, zero initial memory).
StateSpace build_filter(const FilterCoefficients& lam, int c);

// Static sector normalizer [[-sigma, I], [I, m]] over the s*c oracle
// channels; star its trailing channel against any interconnection whose
// first input/output blocks are the oracle pair. Requires m_i < L_i.
StateSpace sector_gain(const OracleClass& cls);

// Normalizes each sector [m_i, L_i] by the loop transform that renders the
// transformed uncertainty antipassive; input is the (already rho-weighted)
// square interconnection from oracle outputs to oracle inputs. Feedthrough
// obeys D_t = -sigma + D (I - m D)^{-1}. Requires m_i < L_i on every block.
StateSpace sector_transform(const StateSpace& g_bar, const OracleClass& cls);

// Sector-normalized stack with the filter prepended. The state and input
// matrices do not depend on the coefficients; the output matrices are
// strictly linear in them, with one basis matrix per coefficient stored at
// index i * (nu_max + 1) + nu.
struct FilteredSystem {
  MatrixXd a, b;
  std::vector<MatrixXd> c_basis, d_basis;
  int s = 0;
  int c = 1;
  int nu_max = 0;

  MatrixXd c_at(const MatrixXd& lambda) const;
  MatrixXd d_at(const MatrixXd& lambda) const;
  StateSpace instance(const FilterCoefficients& lam) const;
};

FilteredSystem assemble_filtered(const StateSpace& g, const OracleClass& cls,
                                 double rho, int nu_max);

// Exponential-rate certificate: M > 0 and valid coefficients making the
// filtered stack strictly antipassive at rate rho. margin is the smallest
// eigenvalue slack of the verified inequalities; trace records the rates
// probed on the way here and their verdicts.
struct Certificate {
  double rho = 1.0;
  MatrixXd lyapunov_m;
  FilterCoefficients lambda;
  double margin = 0.0;
  std::vector<std::pair<double, bool>> trace;
};

enum class CertifyMode { FixedLambda, Joint };

struct CertifyOutcome {
  std::optional<Certificate> certificate;
  // Eigenvalue shortfall at the best point found when not certified.
  double deficit = 0.0;

  bool certified() const { return certificate.has_value(); }
};

// Searches for a certificate at a single rate. Joint mode optimizes the
// coefficients alongside M; FixedLambda uses fixed_lambda (identity when
// null) and takes nu_max from it. Throws IllPosed when the sector loop is
// singular or the feedthrough is not block lower triangular, SolverUnknown
// when the backend cannot reach a verdict.
CertifyOutcome antipassivity_certify(
    const StateSpace& g, const OracleClass& cls, double rho, int nu_max,
    CertifyMode mode, const FilterCoefficients* fixed_lambda = nullptr);

struct RateOptions {
  double rho_lo = 1e-3;
  double rho_hi = 1.5;
  double tol = 1e-3;
  int nu_max = 3;
};

// Bisects the smallest certifiable rate in [rho_lo, rho_hi] to within tol
// (joint mode). Throws NeverCertified when rho_hi itself fails; backend
// Unknown verdicts inside the bracket count as failures, which keeps the
// returned certificate sound.
Certificate analyze_rate(const StateSpace& g, const OracleClass& cls,
                         const RateOptions& opts = RateOptions());

// Minimum over horizons T of the accumulated dissipation sum of a recorded
// trajectory under the exponentially weighted, sector-normalized, filtered
// signals. Signals are shifted by (z_star, w_star) first (zero when empty);
// nonnegative whenever the oracles lie in the class and the coefficients are
// valid at rate rho.
double empirical_dissipation_check(const Trajectory& traj,
                                   const OracleClass& cls, double rho,
                                   const FilterCoefficients& lam,
                                   const VectorXd& z_star = VectorXd(),
                                   const VectorXd& w_star = VectorXd());

}  // namespace algoforge
