#pragma once

#include <Eigen/Dense>

namespace lqr_rpi {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense real symmetric matrix. Construction symmetrizes the input as
/// (X + X^T) / 2, so `matrix()` is always exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const MatrixXd& x);

  static SymMatrix identity(Eigen::Index k);
  static SymMatrix zero(Eigen::Index k);

  Eigen::Index order() const { return m_.rows(); }
  const MatrixXd& matrix() const { return m_; }
  operator const MatrixXd&() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  double frobenius() const { return m_.norm(); }
  double min_eigenvalue() const;
  double max_eigenvalue() const;

  friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
  friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);
  friend SymMatrix operator*(double s, const SymMatrix& a);

 private:
  MatrixXd m_;
};

/// Half-vectorization with sqrt(2)-scaled off-diagonals, upper triangle in
/// row-major order: [y11, s*y12, ..., s*y1k, y22, s*y23, ..., ykk].
/// svec(Y) . svec(Z) == trace(Y Z).
VectorXd svec(const SymMatrix& y);

/// Inverse of svec. Throws DimensionError unless v.size() == k(k+1)/2.
SymMatrix smat(const VectorXd& v);

/// Order k such that k(k+1)/2 == len, or -1 if len is not triangular.
Eigen::Index triangular_order(Eigen::Index len);

/// Column stacking.
VectorXd vec(const MatrixXd& x);

/// Inverse of vec for an rows x cols matrix.
MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);

MatrixXd kron(const MatrixXd& x, const MatrixXd& y);

/// [I  -Z^T] U [I; -Z] for U of order n+m and Z of shape m x n.
SymMatrix quad_form_h(const SymMatrix& u, const MatrixXd& z);

/// Smallest eigenvalue of the symmetric part of a square matrix.
double min_sym_eigenvalue(const MatrixXd& x);

}  // namespace lqr_rpi
