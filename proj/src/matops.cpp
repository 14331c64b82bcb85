#include "lqr_rpi/matops.hpp"

#include <cmath>
#include <string>

#include "lqr_rpi/errors.hpp"

namespace lqr_rpi {

namespace {
const double kSqrt2 = std::sqrt(2.0);
}  // namespace

SymMatrix::SymMatrix(const MatrixXd& x) {
  if (x.rows() != x.cols()) {
    throw DimensionError("SymMatrix: input is " + std::to_string(x.rows()) +
                         "x" + std::to_string(x.cols()) + ", not square");
  }
  m_ = 0.5 * (x + x.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index k) {
  return SymMatrix(MatrixXd::Identity(k, k));
}

SymMatrix SymMatrix::zero(Eigen::Index k) {
  return SymMatrix(MatrixXd::Zero(k, k));
}

double SymMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double SymMatrix::max_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  return SymMatrix(a.m_ + b.m_);
}

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  return SymMatrix(a.m_ - b.m_);
}

SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.m_); }

VectorXd svec(const SymMatrix& y) {
  const Eigen::Index k = y.order();
  VectorXd v(k * (k + 1) / 2);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    v(idx++) = y(i, i);
    for (Eigen::Index j = i + 1; j < k; ++j) v(idx++) = kSqrt2 * y(i, j);
  }
  return v;
}

Eigen::Index triangular_order(Eigen::Index len) {
  if (len < 1) return -1;
  auto k = static_cast<Eigen::Index>(
      std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  return k * (k + 1) / 2 == len ? k : -1;
}

SymMatrix smat(const VectorXd& v) {
  const Eigen::Index k = triangular_order(v.size());
  if (k < 0) {
    throw DimensionError("smat: length " + std::to_string(v.size()) +
                         " is not of the form k(k+1)/2");
  }
  MatrixXd m(k, k);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    m(i, i) = v(idx++);
    for (Eigen::Index j = i + 1; j < k; ++j) {
      m(i, j) = m(j, i) = v(idx++) / kSqrt2;
    }
  }
  return SymMatrix(m);
}

VectorXd vec(const MatrixXd& x) {
  return Eigen::Map<const VectorXd>(x.data(), x.size());
}

MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw DimensionError("unvec: length " + std::to_string(v.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

MatrixXd kron(const MatrixXd& x, const MatrixXd& y) {
  MatrixXd out(x.rows() * y.rows(), x.cols() * y.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
    }
  }
  return out;
}

SymMatrix quad_form_h(const SymMatrix& u, const MatrixXd& z) {
  const Eigen::Index m = z.rows();
  const Eigen::Index n = z.cols();
  if (u.order() != n + m) {
    throw DimensionError("quad_form_h: U has order " + std::to_string(u.order()) +
                         " but Z is " + std::to_string(m) + "x" +
                         std::to_string(n));
  }
  MatrixXd t(n + m, n);
  t.topRows(n).setIdentity();
  t.bottomRows(m) = -z;
  return SymMatrix(t.transpose() * u.matrix() * t);
}

double min_sym_eigenvalue(const MatrixXd& x) {
  return SymMatrix(x).min_eigenvalue();
}

}  // namespace lqr_rpi
