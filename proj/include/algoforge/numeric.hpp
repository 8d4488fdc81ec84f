#pragma once

#include <Eigen/Dense>

namespace algoforge {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Largest absolute entry; 0 for empty matrices. Used to scale tolerances.
double max_abs(const MatrixXd& m);

// Rank decisions use the SVD rule tol = max(rows, cols) * eps * sigma_max unless
// a nonnegative override is supplied.
int rank_svd(const MatrixXd& m, double tol = -1.0);

// Orthonormal basis of the kernel (columns); empty basis has zero columns.
MatrixXd nullspace_basis(const MatrixXd& m, double tol = -1.0);

// Orthonormal basis of the range (columns).
MatrixXd range_basis(const MatrixXd& m, double tol = -1.0);

// Orthonormal completion: columns of q span the orthogonal complement of ran(basis)
// inside R^dim. basis must have orthonormal columns.
MatrixXd orthogonal_complement(const MatrixXd& basis, int dim);

// 2-norm condition number; +inf when numerically singular.
double cond_2(const MatrixXd& m);

// Moore-Penrose pseudoinverse with the default rank rule.
MatrixXd pinv(const MatrixXd& m, double tol = -1.0);

// True when every column of b lies in ran(a) up to tol * (1 + max_abs(b)).
bool range_contains(const MatrixXd& a, const MatrixXd& b, double tol);

MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

// a (x) I_c, the block pattern used by all per-coordinate liftings.
MatrixXd kron_identity(const MatrixXd& a, int c);

}  // namespace algoforge
