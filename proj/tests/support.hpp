#pragma once

#include <random>

#include "algoforge/lti.hpp"
#include "algoforge/numeric.hpp"

namespace testsupport {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                                     double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline algoforge::StateSpace random_system(std::mt19937_64& rng, int n, int inputs,
                                           int outputs, double scale = 1.0) {
  return algoforge::make_state_space(random_matrix(rng, n, n, scale),
                                     random_matrix(rng, n, inputs, scale),
                                     random_matrix(rng, outputs, n, scale),
                                     random_matrix(rng, outputs, inputs, scale));
}

inline double transfer_gap(const algoforge::StateSpace& g1,
                           const algoforge::StateSpace& g2) {
  // Samples off the unit circle so marginally stable poles cannot blow up the
  // comparison; enough points to pin down any rational mismatch in practice.
  double gap = 0.0;
  for (int k = 0; k < 7; ++k) {
    const std::complex<double> z =
        2.3 * std::exp(std::complex<double>(0.0, 0.9 * k + 0.31));
    gap = std::max(gap, (algoforge::transfer_at(g1, z) - algoforge::transfer_at(g2, z))
                            .cwiseAbs()
                            .maxCoeff());
  }
  return gap;
}

// Three-operator splitting recursion in its textbook realization, lifted to c
// coordinates per block.
inline algoforge::StateSpace three_operator_splitting(double gamma, double lambda,
                                                      int c) {
  Eigen::MatrixXd a(1, 1), b(1, 3), cm(3, 1), d(3, 3);
  a << 1.0;
  b << -gamma * lambda, -gamma * lambda, -gamma * lambda;
  cm << 1.0, 1.0, 1.0;
  d << -gamma, 0.0, 0.0, -gamma, 0.0, 0.0, -2.0 * gamma, -gamma, -gamma;
  return algoforge::kron_expand(algoforge::make_state_space(a, b, cm, d), c);
}

}  // namespace testsupport
