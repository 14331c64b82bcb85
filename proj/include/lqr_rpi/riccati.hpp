#pragma once

#include "lqr_rpi/matops.hpp"

namespace lqr_rpi {

/// Numerical rank with tolerance max_dim * eps * sigma_max.
Eigen::Index numerical_rank(const MatrixXd& x);

/// Continuous-time plant dx/dt = A x + B u. Construction checks dimensions
/// and controllability of (A, B); ModelError if uncontrollable.
class LtiSystem {
 public:
  LtiSystem(MatrixXd a, MatrixXd b);

  const MatrixXd& a() const { return a_; }
  const MatrixXd& b() const { return b_; }
  Eigen::Index n() const { return a_.rows(); }
  Eigen::Index m() const { return b_.cols(); }

  /// A - B K.
  MatrixXd closed_loop(const MatrixXd& k) const;
  bool is_stabilizing(const MatrixXd& k) const;

 private:
  MatrixXd a_;
  MatrixXd b_;
};

/// Quadratic cost weights. Q must be PSD (min eigenvalue >= -1e-10) and R PD.
class LqrCost {
 public:
  LqrCost(SymMatrix q, SymMatrix r);

  const SymMatrix& q() const { return q_; }
  const SymMatrix& r() const { return r_; }
  const MatrixXd& r_inv() const { return r_inv_; }
  bool q_positive_definite() const { return q_pd_; }

 private:
  SymMatrix q_;
  SymMatrix r_;
  MatrixXd r_inv_;
  bool q_pd_ = false;
};

MatrixXd controllability_matrix(const MatrixXd& a, const MatrixXd& b);
bool is_controllable(const MatrixXd& a, const MatrixXd& b);

/// Observability of (A, Q^{1/2}); Q and Q^{1/2} share a null space so Q is
/// used directly as the output map.
bool is_observable(const LtiSystem& sys, const LqrCost& cost);

/// Throws ModelError if the dimensions of sys and cost disagree or (A, Q^{1/2})
/// is unobservable.
void check_problem(const LtiSystem& sys, const LqrCost& cost);

struct AreSolution {
  SymMatrix p_star;
  MatrixXd k_star;
  double residual_norm = 0.0;
  int iterations = 0;
};

/// A^T P + P A - P B R^{-1} B^T P + Q.
SymMatrix are_residual(const LtiSystem& sys, const LqrCost& cost,
                       const SymMatrix& p);

/// Ground-truth ARE solution by exact Kleinman iteration from a stabilizing
/// K1, stopped when ||P_{i+1} - P_i||_F < tol * max(1, ||P_i||_F), or when
/// the step has dropped below 1e-8 of that scale and stops shrinking (the
/// rounding floor of the Lyapunov solves).
/// StabilityError if K1 is not stabilizing, ConvergenceError after max_iter.
AreSolution solve_are(const LtiSystem& sys, const LqrCost& cost,
                      const MatrixXd& k1, double tol = 1e-12,
                      int max_iter = 200);

/// Some K with A - B K Hurwitz. Returns zero if A is already Hurwitz;
/// otherwise integrates the Riccati differential equation of the surrogate
/// cost Q = I, R = I forward in reversed time from P = 0 until A - B B^T P is
/// Hurwitz and returns B^T P. ConvergenceError if the horizon cap is reached.
MatrixXd find_stabilizing_gain(const LtiSystem& sys, double horizon = 1000.0);

}  // namespace lqr_rpi
