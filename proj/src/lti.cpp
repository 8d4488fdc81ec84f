#include "algoforge/lti.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

#include "algoforge/errors.hpp"

namespace algoforge {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Complex rank with the SVD tolerance rule; used by the PBH tests.
int rank_complex(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() *
                     (s.size() ? s(0) : 0.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return r;
}

}  // namespace

StateSpace make_state_space(MatrixXd a, MatrixXd b, MatrixXd c, MatrixXd d) {
  require(a.rows() == a.cols(), "state matrix must be square");
  require(b.rows() == a.rows(), "input matrix row count must match state dim");
  require(c.cols() == a.rows(), "output matrix column count must match state dim");
  require(d.rows() == c.rows() && d.cols() == b.cols(),
          "feedthrough must be outputs x inputs");
  return StateSpace{std::move(a), std::move(b), std::move(c), std::move(d)};
}

StateSpace static_gain(MatrixXd d) {
  const auto p = d.rows(), m = d.cols();
  return StateSpace{MatrixXd::Zero(0, 0), MatrixXd::Zero(0, m),
                    MatrixXd::Zero(p, 0), std::move(d)};
}

StateSpace cascade(const StateSpace& g2, const StateSpace& g1) {
  require(g1.outputs() == g2.inputs(), "cascade: inner outputs must feed outer inputs");
  const int n2 = g2.n(), n1 = g1.n();
  MatrixXd a(n2 + n1, n2 + n1);
  a << g2.a, g2.b * g1.c, MatrixXd::Zero(n1, n2), g1.a;
  MatrixXd b(n2 + n1, g1.inputs());
  b << g2.b * g1.d, g1.b;
  MatrixXd c(g2.outputs(), n2 + n1);
  c << g2.c, g2.d * g1.c;
  return StateSpace{std::move(a), std::move(b), std::move(c), g2.d * g1.d};
}

StateSpace blkdiag(const StateSpace& g1, const StateSpace& g2) {
  const int n1 = g1.n(), n2 = g2.n();
  MatrixXd a = MatrixXd::Zero(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = g1.a;
  a.bottomRightCorner(n2, n2) = g2.a;
  MatrixXd b = MatrixXd::Zero(n1 + n2, g1.inputs() + g2.inputs());
  b.topLeftCorner(n1, g1.inputs()) = g1.b;
  b.bottomRightCorner(n2, g2.inputs()) = g2.b;
  MatrixXd c = MatrixXd::Zero(g1.outputs() + g2.outputs(), n1 + n2);
  c.topLeftCorner(g1.outputs(), n1) = g1.c;
  c.bottomRightCorner(g2.outputs(), n2) = g2.c;
  MatrixXd d = MatrixXd::Zero(g1.outputs() + g2.outputs(), g1.inputs() + g2.inputs());
  d.topLeftCorner(g1.outputs(), g1.inputs()) = g1.d;
  d.bottomRightCorner(g2.outputs(), g2.inputs()) = g2.d;
  return StateSpace{std::move(a), std::move(b), std::move(c), std::move(d)};
}

StateSpace blkdiag(const std::vector<StateSpace>& gs) {
  require(!gs.empty(), "blkdiag needs at least one system");
  StateSpace acc = gs[0];
  for (size_t i = 1; i < gs.size(); ++i) acc = blkdiag(acc, gs[i]);
  return acc;
}

StateSpace star(const StateSpace& g1, int u_width, int y_width, const StateSpace& g2) {
  require(u_width >= 0 && y_width >= 0, "star: channel widths must be nonnegative");
  require(g1.inputs() >= u_width && g1.outputs() >= y_width,
          "star: g1 too small for requested channel");
  require(g2.inputs() >= y_width && g2.outputs() >= u_width,
          "star: g2 too small for requested channel");
  const int n1 = g1.n(), n2 = g2.n();
  const int w1 = g1.inputs() - u_width, z1 = g1.outputs() - y_width;
  const int w2 = g2.inputs() - y_width, z2 = g2.outputs() - u_width;

  const MatrixXd b1w = g1.b.leftCols(w1), b1u = g1.b.rightCols(u_width);
  const MatrixXd c1z = g1.c.topRows(z1), c1y = g1.c.bottomRows(y_width);
  const MatrixXd d11 = g1.d.topLeftCorner(z1, w1), d12 = g1.d.topRightCorner(z1, u_width);
  const MatrixXd d21 = g1.d.bottomLeftCorner(y_width, w1);
  const MatrixXd d22 = g1.d.bottomRightCorner(y_width, u_width);

  const MatrixXd b2y = g2.b.leftCols(y_width), b2w = g2.b.rightCols(w2);
  const MatrixXd c2u = g2.c.topRows(u_width), c2z = g2.c.bottomRows(z2);
  const MatrixXd e11 = g2.d.topLeftCorner(u_width, y_width);
  const MatrixXd e12 = g2.d.topRightCorner(u_width, w2);
  const MatrixXd e21 = g2.d.bottomLeftCorner(z2, y_width);
  const MatrixXd e22 = g2.d.bottomRightCorner(z2, w2);

  const MatrixXd loop = MatrixXd::Identity(u_width, u_width) - e11 * d22;
  if (cond_2(loop) >= 1e12)
    throw IllPosed("star: algebraic loop matrix is numerically singular");
  Eigen::PartialPivLU<MatrixXd> lu(loop);

  const int nc = n1 + n2 + w1 + w2;  // columns: [x1, x2, w1, w2]
  MatrixXd ku = MatrixXd::Zero(u_width, nc);
  ku.middleCols(0, n1) = e11 * c1y;
  ku.middleCols(n1, n2) = c2u;
  ku.middleCols(n1 + n2, w1) = e11 * d21;
  ku.middleCols(n1 + n2 + w1, w2) = e12;
  const MatrixXd urow = lu.solve(ku);

  MatrixXd yrow = MatrixXd::Zero(y_width, nc);
  yrow.middleCols(0, n1) = c1y;
  yrow.middleCols(n1 + n2, w1) = d21;
  yrow += d22 * urow;

  MatrixXd xrow = MatrixXd::Zero(n1 + n2, nc);
  xrow.block(0, 0, n1, n1) = g1.a;
  xrow.block(0, n1 + n2, n1, w1) = b1w;
  xrow.topRows(n1) += b1u * urow;
  xrow.block(n1, n1, n2, n2) = g2.a;
  xrow.block(n1, n1 + n2 + w1, n2, w2) = b2w;
  xrow.bottomRows(n2) += b2y * yrow;

  MatrixXd zrow = MatrixXd::Zero(z1 + z2, nc);
  zrow.block(0, 0, z1, n1) = c1z;
  zrow.block(0, n1 + n2, z1, w1) = d11;
  zrow.topRows(z1) += d12 * urow;
  zrow.block(z1, n1, z2, n2) = c2z;
  zrow.block(z1, n1 + n2 + w1, z2, w2) = e22;
  zrow.bottomRows(z2) += e21 * yrow;

  return StateSpace{xrow.leftCols(n1 + n2), xrow.rightCols(w1 + w2),
                    zrow.leftCols(n1 + n2), zrow.rightCols(w1 + w2)};
}

StateSpace coordinate_change(const StateSpace& g, const MatrixXd& t) {
  require(t.rows() == g.n() && t.cols() == g.n(), "coordinate change must be n x n");
  if (g.n() == 0) return g;
  if (cond_2(t) >= 1e12) throw IllPosed("coordinate change is numerically singular");
  Eigen::PartialPivLU<MatrixXd> lu(t);
  return StateSpace{lu.solve(g.a * t), lu.solve(g.b), g.c * t, g.d};
}

Eigen::MatrixXcd transfer_at(const StateSpace& g, std::complex<double> z) {
  if (g.n() == 0) return g.d.cast<std::complex<double>>();
  Eigen::MatrixXcd zi = z * Eigen::MatrixXcd::Identity(g.n(), g.n()) -
                        g.a.cast<std::complex<double>>();
  return g.c.cast<std::complex<double>>() *
             zi.lu().solve(g.b.cast<std::complex<double>>()) +
         g.d.cast<std::complex<double>>();
}

double spectral_radius(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_schur(const MatrixXd& a, double margin) {
  return spectral_radius(a) < 1.0 - margin;
}

bool pbh_stabilizable(const MatrixXd& a, const MatrixXd& b, double /*tol*/) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) return true;
  Eigen::EigenSolver<MatrixXd> es(a);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd test(n, n + b.cols());
    test.leftCols(n) = a.cast<std::complex<double>>() -
                       lam * Eigen::MatrixXcd::Identity(n, n);
    test.rightCols(b.cols()) = b.cast<std::complex<double>>();
    if (rank_complex(test) < n) return false;
  }
  return true;
}

bool pbh_detectable(const MatrixXd& a, const MatrixXd& c, double tol) {
  return pbh_stabilizable(a.transpose(), c.transpose(), tol);
}

bool is_controllable(const MatrixXd& a, const MatrixXd& b) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) return true;
  Eigen::EigenSolver<MatrixXd> es(a);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    Eigen::MatrixXcd test(n, n + b.cols());
    test.leftCols(n) = a.cast<std::complex<double>>() -
                       lam * Eigen::MatrixXcd::Identity(n, n);
    test.rightCols(b.cols()) = b.cast<std::complex<double>>();
    if (rank_complex(test) < n) return false;
  }
  return true;
}

bool is_observable(const MatrixXd& a, const MatrixXd& c) {
  return is_controllable(a.transpose(), c.transpose());
}

PartitionedPlant make_partitioned_plant(MatrixXd a, MatrixXd b1, MatrixXd b2,
                                        MatrixXd c1, MatrixXd d1, MatrixXd d12,
                                        MatrixXd c2, MatrixXd d21, MatrixXd d2,
                                        int s, int c) {
  require(s >= 1 && c >= 1, "plant needs s >= 1 blocks of size c >= 1");
  const int n = static_cast<int>(a.rows());
  const int sc = s * c;
  require(a.cols() == n, "plant state matrix must be square");
  require(b1.rows() == n && b1.cols() == sc, "b1 must be n x s*c");
  require(b2.rows() == n, "b2 row count must match state dim");
  require(c1.rows() == sc && c1.cols() == n, "c1 must be s*c x n");
  require(d1.rows() == sc && d1.cols() == sc, "d1 must be s*c x s*c");
  require(d12.rows() == sc && d12.cols() == b2.cols(), "d12 must be s*c x nu");
  require(c2.cols() == n, "c2 column count must match state dim");
  require(d21.rows() == c2.rows() && d21.cols() == sc, "d21 must be ny x s*c");
  require(d2.rows() == c2.rows() && d2.cols() == b2.cols(), "d2 must be ny x nu");
  return PartitionedPlant{std::move(a),  std::move(b1),  std::move(b2),
                          std::move(c1), std::move(d1),  std::move(d12),
                          std::move(c2), std::move(d21), std::move(d2),
                          s,             c};
}

StateSpace to_state_space(const PartitionedPlant& p) {
  const int n = p.n(), sc = p.zw(), nu = p.nu(), ny = p.ny();
  MatrixXd b(n, sc + nu);
  b << p.b1, p.b2;
  MatrixXd c(sc + ny, n);
  c << p.c1, p.c2;
  MatrixXd d(sc + ny, sc + nu);
  d << p.d1, p.d12, p.d21, p.d2;
  return StateSpace{p.a, std::move(b), std::move(c), std::move(d)};
}

PartitionedPlant from_state_space(const StateSpace& g, int s, int c, int nu, int ny) {
  const int sc = s * c;
  require(g.inputs() == sc + nu && g.outputs() == sc + ny,
          "state space does not match requested partition");
  return make_partitioned_plant(
      g.a, g.b.leftCols(sc), g.b.rightCols(nu), g.c.topRows(sc),
      g.d.topLeftCorner(sc, sc), g.d.topRightCorner(sc, nu), g.c.bottomRows(ny),
      g.d.bottomLeftCorner(ny, sc), g.d.bottomRightCorner(ny, nu), s, c);
}

StateSpace close_controller(const PartitionedPlant& p, const StateSpace& k) {
  require(k.inputs() == p.ny() && k.outputs() == p.nu(),
          "controller dimensions must match the plant's (u, y) channel");
  return star(to_state_space(p), p.nu(), p.ny(), k);
}

PartitionedPlant star_plants(const PartitionedPlant& p1, const PartitionedPlant& p2) {
  require(static_cast<int>(p2.b1.cols()) == p1.ny() &&
              static_cast<int>(p2.c1.rows()) == p1.nu(),
          "star_plants: p2's first channel must match p1's controller channel");
  // p2's first channel is consumed whole; its own s*c split is irrelevant here.
  const StateSpace r = star(to_state_space(p1), p1.nu(), p1.ny(), to_state_space(p2));
  return from_state_space(r, p1.s, p1.c, p2.nu(), p2.ny());
}

StateSpace rho_weight(const StateSpace& g, double rho) {
  require(rho > 0.0, "weighting rate must be positive");
  return StateSpace{g.a / rho, g.b / rho, g.c, g.d};
}

PartitionedPlant rho_weight(const PartitionedPlant& p, double rho) {
  require(rho > 0.0, "weighting rate must be positive");
  PartitionedPlant out = p;
  out.a /= rho;
  out.b1 /= rho;
  out.b2 /= rho;
  return out;
}

StateSpace kron_expand(const StateSpace& base, int c) {
  require(c >= 1, "kron factor must be positive");
  return StateSpace{kron_identity(base.a, c), kron_identity(base.b, c),
                    kron_identity(base.c, c), kron_identity(base.d, c)};
}

namespace {

// Average the c-diagonal of each block; deviation accumulates into dev.
MatrixXd kron_base(const MatrixXd& m, int c, double& dev) {
  const Eigen::Index rows = m.rows() / c, cols = m.cols() / c;
  MatrixXd base(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < c; ++k) acc += m(i * c + k, j * c + k);
      base(i, j) = acc / c;
    }
  dev = std::max(dev, max_abs(m - kron_identity(base, c)));
  return base;
}

}  // namespace

KroneckerSystem kron_detect(const StateSpace& g, int c, double tol) {
  require(c >= 1, "kron factor must be positive");
  if (g.n() % c != 0 || g.inputs() % c != 0 || g.outputs() % c != 0)
    throw NotKronecker("dimensions are not multiples of the block size",
                       std::numeric_limits<double>::infinity());
  double dev = 0.0;
  StateSpace base{kron_base(g.a, c, dev), kron_base(g.b, c, dev),
                  kron_base(g.c, c, dev), kron_base(g.d, c, dev)};
  const double scale = 1.0 + std::max(std::max(max_abs(g.a), max_abs(g.b)),
                                      std::max(max_abs(g.c), max_abs(g.d)));
  if (dev > tol * scale)
    throw NotKronecker("system is not a block lifting of a smaller base", dev);
  return KroneckerSystem{std::move(base), c};
}

}  // namespace algoforge
