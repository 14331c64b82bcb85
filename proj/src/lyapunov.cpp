#include "lqr_rpi/lyapunov.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lqr_rpi/errors.hpp"

namespace lqr_rpi {

namespace {

void require_square(const MatrixXd& x, const char* who) {
  if (x.rows() != x.cols()) {
    throw DimensionError(std::string(who) + ": X is " +
                         std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + ", not square");
  }
}

void require_hurwitz(const MatrixXd& x, double tol, const char* who) {
  const double abscissa = spectral_abscissa(x);
  if (!(abscissa < -tol)) {
    throw StabilityError(std::string(who) +
                         ": X is not Hurwitz (spectral abscissa " +
                         std::to_string(abscissa) + ")");
  }
}

}  // namespace

SymMatrix lyap_apply(const MatrixXd& x, const SymMatrix& y) {
  require_square(x, "lyap_apply");
  if (x.rows() != y.order()) {
    throw DimensionError("lyap_apply: X and Y orders differ");
  }
  return SymMatrix(x.transpose() * y.matrix() + y.matrix() * x);
}

MatrixXd kron_lyap_matrix(const MatrixXd& x) {
  require_square(x, "kron_lyap_matrix");
  const MatrixXd eye = MatrixXd::Identity(x.rows(), x.rows());
  const MatrixXd xt = x.transpose();
  return kron(eye, xt) + kron(xt, eye);
}

SymMatrix lyap_solve_unchecked(const MatrixXd& x, const SymMatrix& z) {
  require_square(x, "lyap_solve");
  const Eigen::Index n = x.rows();
  if (z.order() != n) throw DimensionError("lyap_solve: X and Z orders differ");

  Eigen::FullPivLU<MatrixXd> lu(kron_lyap_matrix(x));
  if (!lu.isInvertible()) {
    throw NumericalError("lyap_solve: Kronecker Lyapunov matrix is singular");
  }
  const VectorXd y = lu.solve(-vec(z.matrix()));
  if (!y.allFinite()) throw NumericalError("lyap_solve: non-finite solution");
  return SymMatrix(unvec(y, n, n));
}

SymMatrix lyap_solve(const MatrixXd& x, const SymMatrix& z, double hurwitz_tol) {
  require_square(x, "lyap_solve");
  require_hurwitz(x, hurwitz_tol, "lyap_solve");
  return lyap_solve_unchecked(x, z);
}

double lyap_inverse_norm(const MatrixXd& x, double hurwitz_tol) {
  require_square(x, "lyap_inverse_norm");
  require_hurwitz(x, hurwitz_tol, "lyap_inverse_norm");
  Eigen::JacobiSVD<MatrixXd> svd(kron_lyap_matrix(x));
  const double smin = svd.singularValues().tail(1)(0);
  if (smin <= 0.0) {
    throw NumericalError("lyap_inverse_norm: singular Kronecker matrix");
  }
  return 1.0 / smin;
}

double spectral_abscissa(const MatrixXd& x) {
  require_square(x, "spectral_abscissa");
  if (!x.allFinite()) throw NumericalError("spectral_abscissa: non-finite input");
  Eigen::EigenSolver<MatrixXd> es(x, false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("spectral_abscissa: eigenvalue computation failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const MatrixXd& x, double tol) {
  return spectral_abscissa(x) < -tol;
}

}  // namespace lqr_rpi
