#include "lqr_rpi/policy_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lqr_rpi/errors.hpp"
#include "lqr_rpi/lyapunov.hpp"
#include "lqr_rpi/random.hpp"

namespace lqr_rpi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMaxBlockCondition = 1e12;

double error_to(const SymMatrix& p, const std::optional<SymMatrix>& p_star) {
  return p_star ? (p - *p_star).frobenius() : kNaN;
}

// Contraction over the transient part of the trace, i.e. while the error is
// well above the ultimate error floor.
double trace_contraction(const std::vector<double>& errs, double floor) {
  double sigma = 0.0;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    if (errs[i] > 10.0 * floor && errs[i] > 0.0) {
      sigma = std::max(sigma, errs[i + 1] / errs[i]);
    }
  }
  return sigma;
}

}  // namespace

double DisturbanceSpec::bound(int i) const {
  switch (mode) {
    case DisturbanceMode::kNone:
      return 0.0;
    case DisturbanceMode::kFixedNorm:
      return norm_bound;
    case DisturbanceMode::kDecaying:
      if (decay == DecayKind::kGeometric) {
        return norm_bound * std::pow(rate, static_cast<double>(i - 1));
      }
      return norm_bound / (1.0 + static_cast<double>(i) * i);
  }
  return 0.0;
}

void DisturbanceSpec::validate() const {
  if (!(norm_bound >= 0.0) || !std::isfinite(norm_bound)) {
    throw Error("disturbance: norm_bound must be finite and >= 0");
  }
  if (mode == DisturbanceMode::kDecaying && decay == DecayKind::kGeometric &&
      !(rate >= 0.0 && rate < 1.0)) {
    throw Error("disturbance: geometric rate must lie in [0, 1)");
  }
}

PolicyEvaluation policy_evaluate(const LtiSystem& sys, const LqrCost& cost,
                                 const MatrixXd& k) {
  const MatrixXd closed = sys.closed_loop(k);
  if (!is_hurwitz(closed)) {
    throw StabilityError("policy_evaluate: gain is not stabilizing");
  }
  const MatrixXd& r = cost.r().matrix();
  SymMatrix p = lyap_solve(closed, SymMatrix(cost.q().matrix() + k.transpose() * r * k));

  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const MatrixXd& a = sys.a();
  const MatrixXd pb = p.matrix() * sys.b();
  MatrixXd g(n + m, n + m);
  g.topLeftCorner(n, n) = cost.q().matrix() + a.transpose() * p.matrix() + p.matrix() * a;
  g.topRightCorner(n, m) = pb;
  g.bottomLeftCorner(m, n) = pb.transpose();
  g.bottomRightCorner(m, m) = r;
  return {std::move(p), SymMatrix(g)};
}

MatrixXd policy_improve(const SymMatrix& g, Eigen::Index m) {
  const Eigen::Index n = g.order() - m;
  if (m < 1 || n < 1) throw DimensionError("policy_improve: bad block split");
  const MatrixXd g22 = g.matrix().bottomRightCorner(m, m);
  const MatrixXd g21 = g.matrix().bottomLeftCorner(m, n);
  Eigen::JacobiSVD<MatrixXd> svd(g22);
  const VectorXd& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || s(0) / smin > kMaxBlockCondition) {
    throw SingularBlockError("policy_improve: G22 is singular");
  }
  return g22.partialPivLu().solve(g21);
}

ExactRun pi_exact_run(const LtiSystem& sys, const LqrCost& cost,
                      const MatrixXd& k1, double tol, int max_iter,
                      const std::optional<SymMatrix>& p_star) {
  check_problem(sys, cost);
  if (!sys.is_stabilizing(k1)) {
    throw StabilityError("pi_exact_run: initial gain is not stabilizing");
  }
  ExactRun run;
  MatrixXd k = k1;
  for (int i = 1; i <= max_iter; ++i) {
    PolicyEvaluation ev = policy_evaluate(sys, cost, k);
    PiIterate it;
    it.index = i;
    it.k = k;
    it.k_next = policy_improve(ev.g, sys.m());
    it.next_stabilizing = sys.is_stabilizing(it.k_next);
    it.margin = stability_margin(it.k, it.k_next, sys.n(), sys.m());
    it.err_to_opt = error_to(ev.p, p_star);
    it.p = std::move(ev.p);
    it.g = std::move(ev.g);
    k = it.k_next;
    const bool done = !run.iterates.empty() &&
                      (it.p - run.iterates.back().p).frobenius() < tol;
    run.iterates.push_back(std::move(it));
    if (done) {
      run.converged = true;
      break;
    }
  }
  return run;
}

SymMatrix make_disturbance(const DisturbanceSpec& spec, int i,
                           Eigen::Index order) {
  const double target = spec.bound(i);
  if (spec.mode == DisturbanceMode::kNone || target == 0.0) {
    return SymMatrix::zero(order);
  }
  KeyedRng rng{spec.seed, static_cast<std::uint64_t>(i)};
  SymMatrix d(rng.normal_matrix(order, order));
  return SymMatrix((target / d.frobenius()) * d.matrix());
}

RobustRun pi_robust_run(const LtiSystem& sys, const LqrCost& cost,
                        const MatrixXd& k1, const DisturbanceSpec& spec,
                        int n_iter, const std::optional<SymMatrix>& p_star) {
  check_problem(sys, cost);
  spec.validate();
  if (!sys.is_stabilizing(k1)) {
    throw StabilityError("pi_robust_run: initial gain is not stabilizing");
  }
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  RobustRun run;
  run.status = "ok";
  IssReport& rep = run.report;
  rep.schedule_hypothesis = true;

  MatrixXd k = k1;
  for (int i = 1; i <= n_iter; ++i) {
    PolicyEvaluation ev = policy_evaluate(sys, cost, k);
    const SymMatrix dg = make_disturbance(spec, i, n + m);
    PiIterate it;
    it.index = i;
    it.k = k;
    it.g = ev.g + dg;
    it.delta_g_norm = dg.frobenius();
    it.err_to_opt = error_to(ev.p, p_star);
    it.p = std::move(ev.p);
    try {
      it.k_next = policy_improve(it.g, m);
    } catch (const SingularBlockError&) {
      run.stability_lost = true;
      run.status = "singular block at i=" + std::to_string(i);
      rep.schedule_hypothesis = false;
      run.iterates.push_back(std::move(it));
      break;
    }
    it.next_stabilizing = sys.is_stabilizing(it.k_next);
    it.margin = stability_margin(it.k, it.k_next, n, m);

    if (it.delta_g_norm < it.margin) {
      ++rep.margin_hypothesis_count;
      if (!it.next_stabilizing) ++rep.margin_violations;
    }
    if (!(it.delta_g_norm < it.margin / (1.0 + static_cast<double>(i) * i))) {
      rep.schedule_hypothesis = false;
    }
    const bool lost = !it.next_stabilizing;
    k = it.k_next;
    run.iterates.push_back(std::move(it));
    if (lost) {
      run.stability_lost = true;
      run.status = "stability lost at i=" + std::to_string(i + 1);
      break;
    }
  }

  rep.margins_ok = rep.margin_violations == 0;
  const double p1 = run.iterates.front().p.frobenius();
  for (const PiIterate& it : run.iterates) {
    rep.error_trace.push_back(it.err_to_opt);
    if (it.p.frobenius() > 6.0 * p1) rep.bounded_ok = false;
  }
  if (p_star) {
    const std::size_t tail = std::min<std::size_t>(5, rep.error_trace.size());
    rep.ultimate_error = *std::max_element(rep.error_trace.end() - tail,
                                           rep.error_trace.end());
    rep.sigma_hat = trace_contraction(rep.error_trace, rep.ultimate_error);
  } else {
    rep.ultimate_error = kNaN;
    rep.error_trace.clear();
  }
  return run;
}

double stability_margin(const MatrixXd& k, const MatrixXd& k_next,
                        Eigen::Index n, Eigen::Index m) {
  auto spectral = [](const MatrixXd& x) {
    if (x.size() == 0) return 0.0;
    return Eigen::JacobiSVD<MatrixXd>(x).singularValues()(0);
  };
  const double rn = std::sqrt(static_cast<double>(n));
  const double md = static_cast<double>(m);
  const double t1 = rn + spectral(k);
  const double t2 = rn + spectral(k_next);
  return 1.0 / (md * t1 * t1 + md * t2 * t2);
}

SymMatrix kleinman_map(const LtiSystem& sys, const LqrCost& cost,
                       const SymMatrix& p) {
  const MatrixXd& b = sys.b();
  const MatrixXd s = b * cost.r_inv() * b.transpose();
  const MatrixXd closed = sys.a() - s * p.matrix();
  return lyap_solve(closed, SymMatrix(cost.q().matrix() + p.matrix() * s * p.matrix()));
}

ContractionEstimate estimate_contraction(const LtiSystem& sys,
                                         const LqrCost& cost,
                                         const SymMatrix& p_star, double radius,
                                         int n_samples, std::uint64_t seed) {
  ContractionEstimate est;
  if (radius == 0.0) {
    // P = P* is the fixed point; the ratio is defined as zero.
    est.used = n_samples;
    return est;
  }
  const Eigen::Index n = sys.n();
  const Eigen::Index dim = n * (n + 1) / 2;
  for (int s = 0; s < n_samples; ++s) {
    KeyedRng rng{seed, static_cast<std::uint64_t>(s)};
    VectorXd dir(dim);
    for (Eigen::Index j = 0; j < dim; ++j) dir(j) = rng.normal();
    // svec is an isometry, so a uniform direction in svec space is uniform
    // on the Frobenius sphere of symmetric matrices.
    const SymMatrix p = p_star + smat(radius / dir.norm() * dir);
    const double dist = (p - p_star).frobenius();
    try {
      const SymMatrix next = kleinman_map(sys, cost, p);
      est.sigma_hat = std::max(est.sigma_hat, (next - p_star).frobenius() / dist);
      ++est.used;
    } catch (const StabilityError&) {
      ++est.excluded;
    }
  }
  return est;
}

}  // namespace lqr_rpi
