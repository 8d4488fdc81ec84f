#pragma once

#include <limits>
#include <variant>
#include <vector>

#include "algoforge/numeric.hpp"

namespace algoforge {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-block sector bounds m_i <= L_i (L_i = +inf allowed, m_i = L_i marks the
// degenerate linear class) over blocks of dimension c.
struct OracleClass {
  VectorXd m, L;
  int c = 1;

  int s() const { return static_cast<int>(m.size()); }
};

OracleClass make_oracle_class(VectorXd m, VectorXd L, int c);

// Sector slopes: sigma = 1/(L - m) and sigma_l = L/(L - m); the L = inf limits
// are 0 and 1.
double sector_sigma(double m, double L);
double sector_sigma_l(double m, double L);

// Degenerate blocks (m = L) widen to [m, m + rel*(1+|m|)] before multiplier use;
// the singleton class is contained in the widened sector.
OracleClass widen_degenerate(const OracleClass& k, double rel = 1e-3);

struct GeneralQuadratic {  // f(v) = 0.5 (v - beta0)' q (v - beta0)
  MatrixXd q;
  VectorXd beta0;
};
struct TestQuadratic {  // f(v) = 0.5 m |v|^2 + b'v
  double m = 0.0;
  VectorXd b;
};
struct L1BallIndicator {  // indicator of {|v|_1 <= radius}
  double radius = 1.0;
};
struct BoxIndicator {  // indicator of {lo <= v <= hi}
  VectorXd lo, hi;
};
struct ScaledL1 {  // f(v) = weight |v|_1
  double weight = 1.0;
};
struct ZeroOracle {};

using BlockOracle = std::variant<GeneralQuadratic, TestQuadratic, L1BallIndicator,
                                 BoxIndicator, ScaledL1, ZeroOracle>;

// Affine-gradient blocks admit linear fixed-point algebra.
bool is_quadratic(const BlockOracle& f);

double oracle_value(const BlockOracle& f, const VectorXd& v);

// Differentiable or uniquely-determined subgradient; NotSingleValued otherwise
// (kinks, boundaries, exteriors of domains).
VectorXd eval_subgradient(const BlockOracle& f, const VectorXd& v);

// w = H(v) with w in F(v + d w), the resolvent-type evaluation induced by the
// self-coupling block d. Smooth blocks solve (I - d grad f) u = shifted input;
// set-valued blocks require d = delta*I with delta < 0 and reduce to a proximal
// step with parameter -delta.
VectorXd eval_yosida(const BlockOracle& f, const MatrixXd& d, const VectorXd& v);

// Fixed-point-centered evaluation: H~(v) = H(v + beta* - d g*) - g*, which has
// H~(0) = 0 whenever (beta*, g*) is a graph point consistent with d.
VectorXd eval_yosida_shifted(const BlockOracle& f, const MatrixXd& d, const VectorXd& v,
                             const VectorXd& beta_star, const VectorXd& g_star);

// Strict sector well-posedness of the coupled evaluation for every member of the
// class (m, L): Sym((sL d - s I)'(I - m d)) < 0, with the L = inf reduction
// d + d' - 2 m d'd < 0. Degenerate m = L sectors are widened first.
bool yosida_well_posed(double m, double L, const MatrixXd& d);

VectorXd soft_threshold(const VectorXd& v, double t);
VectorXd project_l1_ball(const VectorXd& v, double radius);
VectorXd project_box(const VectorXd& v, const VectorXd& lo, const VectorXd& hi);

}  // namespace algoforge
