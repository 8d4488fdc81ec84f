#include "algoforge/numeric.hpp"

#include <cmath>
#include <limits>

namespace algoforge {

double max_abs(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().maxCoeff();
}

namespace {

double rank_tol(const Eigen::JacobiSVD<MatrixXd>& svd, Eigen::Index rows,
                Eigen::Index cols, double override_tol) {
  if (override_tol >= 0.0) return override_tol;
  const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  return static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon() * smax;
}

}  // namespace

int rank_svd(const MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const double t = rank_tol(svd, m.rows(), m.cols(), tol);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > t) ++r;
  return r;
}

MatrixXd nullspace_basis(const MatrixXd& m, double tol) {
  if (m.size() == 0) return MatrixXd::Identity(m.cols(), m.cols());
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeFullV);
  const double t = rank_tol(svd, m.rows(), m.cols(), tol);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > t) ++r;
  return svd.matrixV().rightCols(m.cols() - r);
}

MatrixXd range_basis(const MatrixXd& m, double tol) {
  if (m.size() == 0) return MatrixXd::Zero(m.rows(), 0);
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeFullU);
  const double t = rank_tol(svd, m.rows(), m.cols(), tol);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > t) ++r;
  return svd.matrixU().leftCols(r);
}

MatrixXd orthogonal_complement(const MatrixXd& basis, int dim) {
  if (basis.cols() == 0) return MatrixXd::Identity(dim, dim);
  // Complement = kernel of basis^T; basis columns assumed orthonormal.
  return nullspace_basis(basis.transpose());
}

double cond_2(const MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / smin;
}

MatrixXd pinv(const MatrixXd& m, double tol) {
  if (m.size() == 0) return MatrixXd::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double t = rank_tol(svd, m.rows(), m.cols(), tol);
  VectorXd inv = svd.singularValues();
  for (Eigen::Index i = 0; i < inv.size(); ++i)
    inv(i) = inv(i) > t ? 1.0 / inv(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

bool range_contains(const MatrixXd& a, const MatrixXd& b, double tol) {
  if (b.size() == 0) return true;
  const MatrixXd u = range_basis(a);
  const MatrixXd resid = b - u * (u.transpose() * b);
  return max_abs(resid) <= tol * (1.0 + max_abs(b));
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

MatrixXd kron_identity(const MatrixXd& a, int c) {
  if (c == 1) return a;
  return kron(a, MatrixXd::Identity(c, c));
}

}  // namespace algoforge
