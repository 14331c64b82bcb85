#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lqr_rpi/matops.hpp"
#include "lqr_rpi/riccati.hpp"

namespace lqr_rpi {

/// Vector-valued sum of sinusoids. Channel c evaluates to
/// amplitude * sum_j sin(frequencies[c][j] * t).
struct SinusoidSignal {
  double amplitude = 0.0;
  std::vector<std::vector<double>> frequencies;
  // Provenance of the frequencies when produced by sample().
  std::uint64_t seed = 0;
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;

  /// Draws `count` frequencies per channel i.i.d. uniform on [lo, hi].
  /// Channels get independent draws.
  static SinusoidSignal sample(double amplitude, Eigen::Index channels,
                               int count, double lo, double hi,
                               std::uint64_t seed);
  static SinusoidSignal zero(Eigen::Index channels);

  Eigen::Index channels() const {
    return static_cast<Eigen::Index>(frequencies.size());
  }
  VectorXd operator()(double t) const;
  SinusoidSignal scaled(double new_amplitude) const;
};

/// Trajectory data sampled on t_j = j * dt, j = 0..M:
///   delta_xx row j = svec(x x^T)(t_{j+1}) - svec(x x^T)(t_j)
///   i_xx row j     = integral over [t_j, t_{j+1}] of kron(x, x)
///   i_xu row j     = integral over [t_j, t_{j+1}] of kron(x, u)
struct TrajectoryData {
  MatrixXd delta_xx;  // M x n(n+1)/2
  MatrixXd i_xx;      // M x n^2
  MatrixXd i_xu;      // M x nm
  MatrixXd states;    // (M+1) x n, x(t_j) per row
  int samples = 0;    // M
  double dt = 0.0;
  Eigen::Index n = 0;
  Eigen::Index m = 0;

  Eigen::Index unknowns() const { return n * (n + 1) / 2 + m * n; }
};

struct DataDrivenIterate {
  int index = 0;
  SymMatrix p_hat;
  MatrixXd k;       // gain used to assemble Theta/Xi (K_i)
  MatrixXd k_next;
  double lsq_residual = 0.0;
  bool rank_ok = false;
  double theta_cond = 0.0;
  // Diagnostics against the true plant, when supplied.
  bool gain_stabilizing = true;   // A - B K_i Hurwitz
  bool next_stabilizing = true;   // A - B K_{i+1} Hurwitz
  double err_to_opt = 0.0;        // ||P~_i - P*||_F, P~_i the true cost of K_i
  double p_hat_err = 0.0;         // ||P^_i - P*||_F
};

struct ThetaXi {
  MatrixXd theta;
  VectorXd xi;
};

/// Simulates dx/dt = A x + B u(t) + w(t) with classical RK4 at step
/// dt / substeps, integrating the running integrals alongside the state.
/// DivergenceError if the state becomes non-finite.
TrajectoryData simulate_collect(const LtiSystem& sys, const SinusoidSignal& u,
                                const std::optional<SinusoidSignal>& w,
                                const VectorXd& x0, int samples, double dt,
                                int substeps);

/// Default relative rank tolerance: max(M, n0) * eps.
double default_rank_tol(const TrajectoryData& data);

/// rank([I_xx, I_xu]) == n(n+1)/2 + mn, counting singular values above
/// tol * sigma_max. A negative tol selects default_rank_tol.
bool rank_condition(const TrajectoryData& data, double tol = -1.0);

/// Theta(K) = [delta_xx, -2 I_xx (I_n (x) K^T R) - 2 I_xu (I_n (x) R)],
/// Xi(K) = -I_xx vec(Q + K^T R K).
ThetaXi build_theta_xi(const TrajectoryData& data, const LqrCost& cost,
                       const MatrixXd& k);

/// Minimum-norm least-squares solve of Theta(K) y = Xi(K) and unpacking of
/// y = [svec(P); vec(K_next)].
DataDrivenIterate pi_data_step(const TrajectoryData& data, const LqrCost& cost,
                               const MatrixXd& k, double rank_tol = -1.0);

/// Iterates pi_data_step on a fixed dataset starting from K1. `truth` and
/// `p_star` only feed the diagnostic fields.
std::vector<DataDrivenIterate> pi_data_iterate(
    const TrajectoryData& data, const LqrCost& cost, const MatrixXd& k1,
    int n_iter, const LtiSystem* truth = nullptr,
    const std::optional<SymMatrix>& p_star = std::nullopt);

struct DataRun {
  TrajectoryData data;
  std::vector<DataDrivenIterate> iterates;
};

/// Collects one dataset with u (and optional disturbance w), then iterates
/// off-policy on it. StabilityError if K1 is not stabilizing.
DataRun pi_data_run(const LtiSystem& sys, const LqrCost& cost,
                    const MatrixXd& k1, const SinusoidSignal& u,
                    const std::optional<SinusoidSignal>& w, const VectorXd& x0,
                    int samples, double dt, int substeps, int n_iter,
                    const std::optional<SymMatrix>& p_star = std::nullopt);

/// Writes <prefix>_delta_xx.csv, <prefix>_I_xx.csv, <prefix>_I_xu.csv,
/// <prefix>_states.csv and the <prefix>_data.json sidecar (M, dt, n, m and
/// whatever is passed in `extra_json`, a serialized JSON object).
void write_trajectory_bundle(const TrajectoryData& data,
                             const std::string& prefix,
                             const std::string& extra_json = "{}");
TrajectoryData read_trajectory_bundle(const std::string& prefix);

}  // namespace lqr_rpi
