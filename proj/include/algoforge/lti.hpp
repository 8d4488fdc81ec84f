#pragma once

#include <complex>
#include <vector>

#include "algoforge/numeric.hpp"

namespace algoforge {

// Discrete-time quadruple x+ = A x + B u, y = C x + D u. Zero-state systems are
// legal (0x0 A); all dimension checks happen in make_state_space.
struct StateSpace {
  MatrixXd a, b, c, d;

  int n() const { return static_cast<int>(a.rows()); }
  int inputs() const { return static_cast<int>(d.cols()); }
  int outputs() const { return static_cast<int>(d.rows()); }
};

StateSpace make_state_space(MatrixXd a, MatrixXd b, MatrixXd c, MatrixXd d);
StateSpace static_gain(MatrixXd d);

// g2 after g1; stacked state is (g2, g1).
StateSpace cascade(const StateSpace& g2, const StateSpace& g1);

StateSpace blkdiag(const StateSpace& g1, const StateSpace& g2);
StateSpace blkdiag(const std::vector<StateSpace>& gs);

// Redheffer star. g1 maps [w1; u] -> [z1; y], g2 maps [y; w2] -> [u; z2]; the
// trailing u/y channel of g1 (widths u_width, y_width) closes against the leading
// channel of g2. Result maps [w1; w2] -> [z1; z2] with state (g1, g2).
// IllPosed when the loop matrix I - D22_g1 * D11_g2 has condition >= 1e12.
StateSpace star(const StateSpace& g1, int u_width, int y_width, const StateSpace& g2);

// Similarity transform (T^-1 A T, T^-1 B, C T, D).
StateSpace coordinate_change(const StateSpace& g, const MatrixXd& t);

Eigen::MatrixXcd transfer_at(const StateSpace& g, std::complex<double> z);

double spectral_radius(const MatrixXd& a);

// Strict Schur test with an explicit margin: rho(A) < 1 - margin.
bool is_schur(const MatrixXd& a, double margin = 0.0);

// PBH tests over eigenvalues with |lambda| >= 1 (boundary included).
bool pbh_stabilizable(const MatrixXd& a, const MatrixXd& b, double tol = -1.0);
bool pbh_detectable(const MatrixXd& a, const MatrixXd& c, double tol = -1.0);

// Eigenvector tests at every mode, not just the unstable ones.
bool is_controllable(const MatrixXd& a, const MatrixXd& b);
bool is_observable(const MatrixXd& a, const MatrixXd& c);

// Two-channel plant: inputs (w, u), outputs (z, y) with z,w of width s*c split in
// s blocks of size c.
struct PartitionedPlant {
  MatrixXd a, b1, b2, c1, d1, d12, c2, d21, d2;
  int s = 0, c = 1;

  int n() const { return static_cast<int>(a.rows()); }
  int zw() const { return s * c; }
  int nu() const { return static_cast<int>(b2.cols()); }
  int ny() const { return static_cast<int>(c2.rows()); }
};

PartitionedPlant make_partitioned_plant(MatrixXd a, MatrixXd b1, MatrixXd b2,
                                        MatrixXd c1, MatrixXd d1, MatrixXd d12,
                                        MatrixXd c2, MatrixXd d21, MatrixXd d2,
                                        int s, int c);

// Flatten to input order (w, u), output order (z, y).
StateSpace to_state_space(const PartitionedPlant& p);
PartitionedPlant from_state_space(const StateSpace& g, int s, int c, int nu, int ny);

// Close the controller channel: star(p, k) with k eating the whole (u, y) channel.
// Result maps w -> z with state (plant, controller).
StateSpace close_controller(const PartitionedPlant& p, const StateSpace& k);

// star on plants: p1's (u, y) channel closes against p2's first channel; the
// result keeps p1's (w, z) channel and exposes p2's controller channel.
PartitionedPlant star_plants(const PartitionedPlant& p1, const PartitionedPlant& p2);

// Exponential weighting x_k -> rho^{-k} x_k: (rho^-1 A, rho^-1 B, C, D).
StateSpace rho_weight(const StateSpace& g, double rho);
PartitionedPlant rho_weight(const PartitionedPlant& p, double rho);

struct KroneckerSystem {
  StateSpace base;
  int c = 1;
};

StateSpace kron_expand(const StateSpace& base, int c);

// Recover base with realized = base (x) I_c; NotKronecker (with the deviation)
// when no base reproduces the system within tol * (1 + max entry).
KroneckerSystem kron_detect(const StateSpace& g, int c, double tol = 1e-9);

}  // namespace algoforge
