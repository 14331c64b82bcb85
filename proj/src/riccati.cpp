#include "lqr_rpi/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lqr_rpi/errors.hpp"
#include "lqr_rpi/lyapunov.hpp"

namespace lqr_rpi {

Eigen::Index numerical_rank(const MatrixXd& x) {
  if (x.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(x);
  const VectorXd& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  if (smax == 0.0) return 0;
  const double tol = static_cast<double>(std::max(x.rows(), x.cols())) *
                     std::numeric_limits<double>::epsilon() * smax;
  return (s.array() > tol).count();
}

MatrixXd controllability_matrix(const MatrixXd& a, const MatrixXd& b) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  MatrixXd c(n, n * m);
  MatrixXd block = b;
  for (Eigen::Index i = 0; i < n; ++i) {
    c.middleCols(i * m, m) = block;
    block = a * block;
  }
  return c;
}

bool is_controllable(const MatrixXd& a, const MatrixXd& b) {
  return numerical_rank(controllability_matrix(a, b)) == a.rows();
}

LtiSystem::LtiSystem(MatrixXd a, MatrixXd b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() < 1 || a_.rows() != a_.cols()) {
    throw DimensionError("LtiSystem: A must be square and non-empty");
  }
  if (b_.rows() != a_.rows() || b_.cols() < 1) {
    throw DimensionError("LtiSystem: B must have " + std::to_string(a_.rows()) +
                         " rows and at least one column");
  }
  if (!a_.allFinite() || !b_.allFinite()) {
    throw ModelError("LtiSystem: non-finite entries");
  }
  if (!is_controllable(a_, b_)) {
    throw ModelError("LtiSystem: (A, B) is not controllable");
  }
}

MatrixXd LtiSystem::closed_loop(const MatrixXd& k) const {
  if (k.rows() != m() || k.cols() != n()) {
    throw DimensionError("closed_loop: gain must be " + std::to_string(m()) +
                         "x" + std::to_string(n()));
  }
  return a_ - b_ * k;
}

bool LtiSystem::is_stabilizing(const MatrixXd& k) const {
  return k.allFinite() && is_hurwitz(closed_loop(k));
}

LqrCost::LqrCost(SymMatrix q, SymMatrix r) : q_(std::move(q)), r_(std::move(r)) {
  if (q_.order() < 1 || r_.order() < 1) {
    throw DimensionError("LqrCost: empty weight matrix");
  }
  const double qmin = q_.min_eigenvalue();
  if (qmin < -1e-10) {
    throw ModelError("LqrCost: Q is not positive semidefinite (min eigenvalue " +
                     std::to_string(qmin) + ")");
  }
  if (!(r_.min_eigenvalue() > 0.0)) {
    throw ModelError("LqrCost: R is not positive definite");
  }
  q_pd_ = qmin > 0.0;
  r_inv_ = SymMatrix(r_.matrix().inverse()).matrix();
}

bool is_observable(const LtiSystem& sys, const LqrCost& cost) {
  // Duality: (A, C) observable iff (A^T, C^T) controllable.
  return is_controllable(sys.a().transpose(), cost.q().matrix().transpose());
}

void check_problem(const LtiSystem& sys, const LqrCost& cost) {
  if (cost.q().order() != sys.n() || cost.r().order() != sys.m()) {
    throw DimensionError("cost weights do not match system dimensions");
  }
  if (!is_observable(sys, cost)) {
    throw ModelError("(A, Q^{1/2}) is not observable");
  }
}

SymMatrix are_residual(const LtiSystem& sys, const LqrCost& cost,
                       const SymMatrix& p) {
  if (p.order() != sys.n()) throw DimensionError("are_residual: P order");
  const MatrixXd& a = sys.a();
  const MatrixXd& b = sys.b();
  const MatrixXd& pm = p.matrix();
  return SymMatrix(a.transpose() * pm + pm * a -
                   pm * b * cost.r_inv() * b.transpose() * pm +
                   cost.q().matrix());
}

constexpr double kStallTol = 1e-8;

AreSolution solve_are(const LtiSystem& sys, const LqrCost& cost,
                      const MatrixXd& k1, double tol, int max_iter) {
  check_problem(sys, cost);
  if (!(tol > 0.0)) throw Error("solve_are: tol must be positive");
  if (!sys.is_stabilizing(k1)) {
    throw StabilityError("solve_are: initial gain is not stabilizing");
  }
  const MatrixXd& b = sys.b();
  const MatrixXd& r = cost.r().matrix();
  MatrixXd k = k1;
  SymMatrix p_prev;
  double step_prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= max_iter; ++i) {
    SymMatrix p = lyap_solve(sys.closed_loop(k),
                             SymMatrix(cost.q().matrix() + k.transpose() * r * k));
    k = cost.r_inv() * b.transpose() * p.matrix();
    const double scale = std::max(1.0, p.frobenius());
    const double step = i > 1 ? (p - p_prev).frobenius() : step_prev;
    // Past the quadratic phase the steps only reflect rounding in the
    // Lyapunov solves; a step that no longer shrinks ends the iteration.
    const bool stalled = step < kStallTol * scale && step >= step_prev;
    step_prev = step;
    if (i > 1 && (step < tol * scale || stalled)) {
      AreSolution sol;
      sol.residual_norm = are_residual(sys, cost, p).frobenius();
      sol.p_star = std::move(p);
      sol.k_star = std::move(k);
      sol.iterations = i;
      return sol;
    }
    p_prev = std::move(p);
  }
  throw ConvergenceError("solve_are: no convergence after " +
                         std::to_string(max_iter) + " iterations");
}

MatrixXd find_stabilizing_gain(const LtiSystem& sys, double horizon) {
  const MatrixXd& a = sys.a();
  const MatrixXd& b = sys.b();
  if (is_hurwitz(a)) return MatrixXd::Zero(sys.m(), sys.n());

  const Eigen::Index n = sys.n();
  const MatrixXd bbt = b * b.transpose();
  const MatrixXd eye = MatrixXd::Identity(n, n);
  auto rhs = [&](const MatrixXd& p) -> MatrixXd {
    MatrixXd d = a.transpose() * p + p * a - p * bbt * p + eye;
    return 0.5 * (d + d.transpose());
  };

  const double a_norm = a.norm();
  const double bbt_norm = bbt.norm();
  MatrixXd p = MatrixXd::Zero(n, n);
  double tau = 0.0;
  double next_check = 0.0;
  while (tau < horizon) {
    // Step size tracks the local Lipschitz constant of the right-hand side.
    const double lip = 2.0 * (a_norm + bbt_norm * p.norm()) + 1.0;
    const double h = std::min(0.25 / lip, horizon - tau);
    const MatrixXd k1 = rhs(p);
    const MatrixXd k2 = rhs(p + 0.5 * h * k1);
    const MatrixXd k3 = rhs(p + 0.5 * h * k2);
    const MatrixXd k4 = rhs(p + h * k3);
    p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    tau += h;
    if (!p.allFinite()) {
      throw ConvergenceError("find_stabilizing_gain: Riccati flow diverged");
    }
    if (tau >= next_check) {
      next_check = tau + 0.05;
      if (is_hurwitz(a - bbt * p)) return b.transpose() * p;
    }
  }
  throw ConvergenceError("find_stabilizing_gain: horizon cap reached");
}

}  // namespace lqr_rpi
