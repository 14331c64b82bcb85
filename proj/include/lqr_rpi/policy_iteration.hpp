#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lqr_rpi/matops.hpp"
#include "lqr_rpi/riccati.hpp"

namespace lqr_rpi {

/// Result of evaluating a stabilizing gain K: the value matrix P solving
/// (A-BK)^T P + P(A-BK) + Q + K^T R K = 0 and the block matrix
/// G = [[Q + A^T P + P A, P B], [B^T P, R]] with H(G, K) = 0.
struct PolicyEvaluation {
  SymMatrix p;
  SymMatrix g;
};

/// One policy-iteration record. For robust runs `p` is the exact value of
/// the current gain and `g` is the perturbed block matrix actually used for
/// the update.
struct PiIterate {
  int index = 0;
  SymMatrix p;
  MatrixXd k;       // gain evaluated at this iterate (K_i)
  MatrixXd k_next;  // K_{i+1}
  SymMatrix g;
  double delta_g_norm = 0.0;
  double err_to_opt = 0.0;  // ||P - P*||_F, NaN without a reference
  bool next_stabilizing = true;
  double margin = 0.0;  // a_i for (K_i, K_{i+1})
};

struct ExactRun {
  std::vector<PiIterate> iterates;
  bool converged = false;
};

enum class DisturbanceMode { kNone, kFixedNorm, kDecaying };
enum class DecayKind { kGeometric, kInverseSquare };

/// Realization rule for the disturbances Delta G_i added to the block matrix.
///   fixed_norm: ||Delta G_i||_F == norm_bound
///   decaying:   ||Delta G_i||_F == bound(i), where bound(i) is
///               norm_bound * rate^(i-1) (geometric) or
///               norm_bound / (1 + i^2)  (inverse_square)
struct DisturbanceSpec {
  DisturbanceMode mode = DisturbanceMode::kNone;
  double norm_bound = 0.0;
  DecayKind decay = DecayKind::kGeometric;
  double rate = 0.5;
  std::uint64_t seed = 0;

  double bound(int i) const;
  /// Throws Error on a negative bound or a geometric rate outside [0, 1).
  void validate() const;
};

struct IssReport {
  double sigma_hat = 0.0;
  std::vector<double> error_trace;
  double ultimate_error = 0.0;
  bool margins_ok = true;
  int margin_hypothesis_count = 0;
  int margin_violations = 0;
  // Whether ||Delta G_i||_F < a_i / (1 + i^2) held on every iterate, and
  // whether ||P_i||_F <= 6 ||P_1||_F held throughout.
  bool schedule_hypothesis = false;
  bool bounded_ok = true;
};

struct RobustRun {
  std::vector<PiIterate> iterates;
  IssReport report;
  bool stability_lost = false;
  std::string status;  // "ok", "stability lost at i=..", "singular block at i=.."
};

PolicyEvaluation policy_evaluate(const LtiSystem& sys, const LqrCost& cost,
                                 const MatrixXd& k);

/// G22^{-1} G21 for a block matrix of order n+m. SingularBlockError when
/// the lower-right m x m block has condition number above 1e12.
MatrixXd policy_improve(const SymMatrix& g, Eigen::Index m);

/// Kleinman's iteration from K1 until ||P_{i+1} - P_i||_F < tol.
ExactRun pi_exact_run(const LtiSystem& sys, const LqrCost& cost,
                      const MatrixXd& k1, double tol, int max_iter,
                      const std::optional<SymMatrix>& p_star = std::nullopt);

/// Delta G_i for iteration i; deterministic in (spec.seed, i), symmetric.
SymMatrix make_disturbance(const DisturbanceSpec& spec, int i,
                           Eigen::Index order);

/// Policy iteration with the block matrix perturbed by Delta G_i before each
/// update. A destabilizing or singular update truncates the run and is
/// reported in `status`; only a non-stabilizing K1 throws.
RobustRun pi_robust_run(const LtiSystem& sys, const LqrCost& cost,
                        const MatrixXd& k1, const DisturbanceSpec& spec,
                        int n_iter,
                        const std::optional<SymMatrix>& p_star = std::nullopt);

/// a_i = 1 / (m (sqrt(n) + ||K_i||_2)^2 + m (sqrt(n) + ||K_{i+1}||_2)^2).
double stability_margin(const MatrixXd& k, const MatrixXd& k_next,
                        Eigen::Index n, Eigen::Index m);

/// One exact Kleinman step written in P alone:
/// P+ solves L_{A(P)}(P+) = -(Q + P B R^{-1} B^T P), A(P) = A - B R^{-1} B^T P.
/// StabilityError if A(P) is not Hurwitz.
SymMatrix kleinman_map(const LtiSystem& sys, const LqrCost& cost,
                       const SymMatrix& p);

struct ContractionEstimate {
  double sigma_hat = 0.0;
  int used = 0;
  int excluded = 0;  // samples with non-Hurwitz A(P)
};

/// Max of ||P+ - P*||_F / ||P - P*||_F over P drawn uniformly from the
/// Frobenius sphere of the given radius around P*.
ContractionEstimate estimate_contraction(const LtiSystem& sys,
                                         const LqrCost& cost,
                                         const SymMatrix& p_star, double radius,
                                         int n_samples, std::uint64_t seed);

}  // namespace lqr_rpi
