#pragma once

#include "lqr_rpi/matops.hpp"

namespace lqr_rpi {

inline constexpr double kDefaultHurwitzTol = 1e-9;

/// L_X(Y) = X^T Y + Y X.
SymMatrix lyap_apply(const MatrixXd& x, const SymMatrix& y);

/// Kronecker form I (x) X^T + X^T (x) I, so that
/// kron_lyap_matrix(X) * vec(Y) == vec(lyap_apply(X, Y)).
MatrixXd kron_lyap_matrix(const MatrixXd& x);

/// Solves X^T Y + Y X = -Z. X must be Hurwitz (StabilityError otherwise).
/// Dense LU on the n^2 x n^2 Kronecker system, result symmetrized.
SymMatrix lyap_solve(const MatrixXd& x, const SymMatrix& z,
                     double hurwitz_tol = kDefaultHurwitzTol);

/// Same linear solve without the Hurwitz precondition; only throws if the
/// Kronecker matrix is numerically singular.
SymMatrix lyap_solve_unchecked(const MatrixXd& x, const SymMatrix& z);

/// Spectral norm of kron_lyap_matrix(X)^{-1}, i.e. the Frobenius-induced
/// operator norm of the inverse Lyapunov operator.
double lyap_inverse_norm(const MatrixXd& x,
                         double hurwitz_tol = kDefaultHurwitzTol);

/// Largest real part over the spectrum of X.
double spectral_abscissa(const MatrixXd& x);

bool is_hurwitz(const MatrixXd& x, double tol = kDefaultHurwitzTol);

}  // namespace lqr_rpi
