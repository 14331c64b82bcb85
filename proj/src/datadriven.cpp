#include "lqr_rpi/datadriven.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"

#include "lqr_rpi/csv.hpp"
#include "lqr_rpi/errors.hpp"
#include "lqr_rpi/lyapunov.hpp"
#include "lqr_rpi/policy_iteration.hpp"
#include "lqr_rpi/random.hpp"

namespace lqr_rpi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// svec(x x^T) without forming the outer product.
VectorXd svec_outer(const VectorXd& x) {
  const Eigen::Index n = x.size();
  const double s2 = std::sqrt(2.0);
  VectorXd v(n * (n + 1) / 2);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    v(idx++) = x(i) * x(i);
    for (Eigen::Index j = i + 1; j < n; ++j) v(idx++) = s2 * (x(i) * x(j));
  }
  return v;
}

VectorXd kron_vec(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a(i) * b;
  }
  return out;
}

}  // namespace

SinusoidSignal SinusoidSignal::sample(double amplitude, Eigen::Index channels,
                                      int count, double lo, double hi,
                                      std::uint64_t seed) {
  if (count < 0 || channels < 1 || !(lo <= hi)) {
    throw Error("SinusoidSignal::sample: invalid parameters");
  }
  SinusoidSignal s;
  s.amplitude = amplitude;
  s.seed = seed;
  s.lo = lo;
  s.hi = hi;
  s.count = count;
  s.frequencies.resize(static_cast<std::size_t>(channels));
  for (Eigen::Index c = 0; c < channels; ++c) {
    KeyedRng rng{seed, static_cast<std::uint64_t>(c)};
    auto& f = s.frequencies[static_cast<std::size_t>(c)];
    f.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) f.push_back(rng.uniform(lo, hi));
  }
  return s;
}

SinusoidSignal SinusoidSignal::zero(Eigen::Index channels) {
  SinusoidSignal s;
  s.frequencies.resize(static_cast<std::size_t>(channels));
  return s;
}

VectorXd SinusoidSignal::operator()(double t) const {
  VectorXd out(channels());
  for (std::size_t c = 0; c < frequencies.size(); ++c) {
    double acc = 0.0;
    for (double w : frequencies[c]) acc += std::sin(w * t);
    out(static_cast<Eigen::Index>(c)) = amplitude * acc;
  }
  return out;
}

SinusoidSignal SinusoidSignal::scaled(double new_amplitude) const {
  SinusoidSignal s = *this;
  s.amplitude = new_amplitude;
  return s;
}

TrajectoryData simulate_collect(const LtiSystem& sys, const SinusoidSignal& u,
                                const std::optional<SinusoidSignal>& w,
                                const VectorXd& x0, int samples, double dt,
                                int substeps) {
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  if (!(dt > 0.0) || samples < 1 || substeps < 1) {
    throw Error("simulate_collect: need dt > 0, M >= 1, substeps >= 1");
  }
  if (x0.size() != n || u.channels() != m || (w && w->channels() != n)) {
    throw DimensionError("simulate_collect: x0/u/w dimensions do not match the plant");
  }

  const MatrixXd& a = sys.a();
  const MatrixXd& b = sys.b();
  const Eigen::Index nxx = n * n;
  const Eigen::Index nxu = n * m;
  // Augmented state: [x; int kron(x,x); int kron(x,u)], integrals reset at
  // every sample instant.
  auto rhs = [&](double t, const VectorXd& z) {
    const VectorXd x = z.head(n);
    const VectorXd ut = u(t);
    VectorXd d(n + nxx + nxu);
    VectorXd dx = a * x + b * ut;
    if (w) dx += (*w)(t);
    d.head(n) = dx;
    d.segment(n, nxx) = kron_vec(x, x);
    d.tail(nxu) = kron_vec(x, ut);
    return d;
  };

  TrajectoryData data;
  data.samples = samples;
  data.dt = dt;
  data.n = n;
  data.m = m;
  data.delta_xx.resize(samples, n * (n + 1) / 2);
  data.i_xx.resize(samples, nxx);
  data.i_xu.resize(samples, nxu);
  data.states.resize(samples + 1, n);
  data.states.row(0) = x0.transpose();

  const double h = dt / substeps;
  VectorXd z = VectorXd::Zero(n + nxx + nxu);
  z.head(n) = x0;
  for (int j = 0; j < samples; ++j) {
    const double t0 = j * dt;
    z.tail(nxx + nxu).setZero();
    for (int s = 0; s < substeps; ++s) {
      const double t = t0 + s * h;
      const VectorXd k1 = rhs(t, z);
      const VectorXd k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1);
      const VectorXd k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2);
      const VectorXd k4 = rhs(t + h, z + h * k3);
      z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!z.allFinite()) {
        throw DivergenceError("simulate_collect: state diverged at t=" +
                                  std::to_string(t + h),
                              t + h);
      }
    }
    const VectorXd x_prev = data.states.row(j).transpose();
    const VectorXd x_next = z.head(n);
    data.states.row(j + 1) = x_next.transpose();
    data.delta_xx.row(j) = (svec_outer(x_next) - svec_outer(x_prev)).transpose();
    data.i_xx.row(j) = z.segment(n, nxx).transpose();
    data.i_xu.row(j) = z.tail(nxu).transpose();
  }
  return data;
}

double default_rank_tol(const TrajectoryData& data) {
  return static_cast<double>(std::max<Eigen::Index>(data.samples, data.unknowns())) *
         std::numeric_limits<double>::epsilon();
}

namespace {

Eigen::Index rank_above(const VectorXd& s, double rel_tol) {
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > rel_tol * s(0)).count();
}

}  // namespace

bool rank_condition(const TrajectoryData& data, double tol) {
  if (tol < 0.0) tol = default_rank_tol(data);
  MatrixXd cat(data.samples, data.i_xx.cols() + data.i_xu.cols());
  cat << data.i_xx, data.i_xu;
  Eigen::JacobiSVD<MatrixXd> svd(cat);
  return rank_above(svd.singularValues(), tol) == data.unknowns();
}

ThetaXi build_theta_xi(const TrajectoryData& data, const LqrCost& cost,
                       const MatrixXd& k) {
  const Eigen::Index n = data.n;
  const Eigen::Index m = data.m;
  if (k.rows() != m || k.cols() != n || cost.q().order() != n ||
      cost.r().order() != m) {
    throw DimensionError("build_theta_xi: gain or cost does not match the data");
  }
  const MatrixXd& r = cost.r().matrix();
  const MatrixXd eye = MatrixXd::Identity(n, n);
  const Eigen::Index ns = n * (n + 1) / 2;

  ThetaXi out;
  out.theta.resize(data.samples, ns + m * n);
  out.theta.leftCols(ns) = data.delta_xx;
  out.theta.rightCols(m * n) = -2.0 * data.i_xx * kron(eye, k.transpose() * r) -
                               2.0 * data.i_xu * kron(eye, r);
  out.xi = -data.i_xx * vec(cost.q().matrix() + k.transpose() * r * k);
  return out;
}

DataDrivenIterate pi_data_step(const TrajectoryData& data, const LqrCost& cost,
                               const MatrixXd& k, double rank_tol) {
  const ThetaXi tx = build_theta_xi(data, cost, k);
  const Eigen::Index ns = data.n * (data.n + 1) / 2;

  Eigen::JacobiSVD<MatrixXd> svd(tx.theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  // Relative cutoff for the pseudoinverse.
  svd.setThreshold(static_cast<double>(std::max(tx.theta.rows(), tx.theta.cols())) *
                   std::numeric_limits<double>::epsilon());
  VectorXd y = VectorXd::Zero(tx.theta.cols());
  if (smax > 0.0) y = svd.solve(tx.xi);

  DataDrivenIterate it;
  it.k = k;
  it.p_hat = smat(y.head(ns));
  it.k_next = unvec(y.tail(data.m * data.n), data.m, data.n);
  it.lsq_residual = (tx.theta * y - tx.xi).norm();
  const double smin = s.size() ? s(s.size() - 1) : 0.0;
  it.theta_cond = smin > 0.0 ? smax / smin : kInf;
  const double tol = rank_tol < 0.0 ? default_rank_tol(data) : rank_tol;
  it.rank_ok = rank_above(s, tol) == data.unknowns() &&
               tx.theta.rows() >= data.unknowns() && rank_condition(data, tol);
  return it;
}

std::vector<DataDrivenIterate> pi_data_iterate(
    const TrajectoryData& data, const LqrCost& cost, const MatrixXd& k1,
    int n_iter, const LtiSystem* truth, const std::optional<SymMatrix>& p_star) {
  std::vector<DataDrivenIterate> out;
  MatrixXd k = k1;
  for (int i = 1; i <= n_iter; ++i) {
    DataDrivenIterate it = pi_data_step(data, cost, k);
    it.index = i;
    if (truth) {
      it.gain_stabilizing = truth->is_stabilizing(it.k);
      it.next_stabilizing = truth->is_stabilizing(it.k_next);
      if (p_star) {
        it.p_hat_err = (it.p_hat - *p_star).frobenius();
        it.err_to_opt = it.gain_stabilizing
                            ? (policy_evaluate(*truth, cost, it.k).p - *p_star).frobenius()
                            : kInf;
      }
    } else if (p_star) {
      it.p_hat_err = (it.p_hat - *p_star).frobenius();
      it.err_to_opt = std::numeric_limits<double>::quiet_NaN();
    }
    k = it.k_next;
    out.push_back(std::move(it));
  }
  return out;
}

DataRun pi_data_run(const LtiSystem& sys, const LqrCost& cost,
                    const MatrixXd& k1, const SinusoidSignal& u,
                    const std::optional<SinusoidSignal>& w, const VectorXd& x0,
                    int samples, double dt, int substeps, int n_iter,
                    const std::optional<SymMatrix>& p_star) {
  check_problem(sys, cost);
  if (!sys.is_stabilizing(k1)) {
    throw StabilityError("pi_data_run: initial gain is not stabilizing");
  }
  DataRun run;
  run.data = simulate_collect(sys, u, w, x0, samples, dt, substeps);
  run.iterates = pi_data_iterate(run.data, cost, k1, n_iter, &sys, p_star);
  return run;
}

namespace {

std::vector<std::string> numbered(const std::string& stem, Eigen::Index count) {
  std::vector<std::string> h;
  for (Eigen::Index i = 0; i < count; ++i) h.push_back(stem + std::to_string(i));
  return h;
}

}  // namespace

void write_trajectory_bundle(const TrajectoryData& data,
                             const std::string& prefix,
                             const std::string& extra_json) {
  csv::write_matrix(prefix + "_delta_xx.csv", data.delta_xx,
                    numbered("svec_", data.delta_xx.cols()));
  csv::write_matrix(prefix + "_I_xx.csv", data.i_xx, numbered("xx_", data.i_xx.cols()));
  csv::write_matrix(prefix + "_I_xu.csv", data.i_xu, numbered("xu_", data.i_xu.cols()));
  csv::write_matrix(prefix + "_states.csv", data.states, numbered("x_", data.states.cols()));

  nlohmann::ordered_json side;
  side["M"] = data.samples;
  side["dt"] = data.dt;
  side["n"] = data.n;
  side["m"] = data.m;
  side["extra"] = nlohmann::ordered_json::parse(extra_json);
  std::ofstream os(prefix + "_data.json", std::ios::binary);
  if (!os) throw Error("cannot write " + prefix + "_data.json");
  os << side.dump(2) << '\n';
}

TrajectoryData read_trajectory_bundle(const std::string& prefix) {
  std::ifstream is(prefix + "_data.json");
  if (!is) throw Error("cannot open " + prefix + "_data.json");
  const auto side = nlohmann::json::parse(is);
  TrajectoryData data;
  data.samples = side.at("M").get<int>();
  data.dt = side.at("dt").get<double>();
  data.n = side.at("n").get<Eigen::Index>();
  data.m = side.at("m").get<Eigen::Index>();
  data.delta_xx = csv::read_matrix(prefix + "_delta_xx.csv");
  data.i_xx = csv::read_matrix(prefix + "_I_xx.csv");
  data.i_xu = csv::read_matrix(prefix + "_I_xu.csv");
  data.states = csv::read_matrix(prefix + "_states.csv");
  const Eigen::Index rows = data.samples;
  if (data.delta_xx.rows() != rows || data.i_xx.rows() != rows ||
      data.i_xu.rows() != rows || data.states.rows() != rows + 1 ||
      data.delta_xx.cols() != data.n * (data.n + 1) / 2 ||
      data.i_xx.cols() != data.n * data.n || data.i_xu.cols() != data.n * data.m) {
    throw DimensionError("trajectory bundle " + prefix + " has inconsistent shapes");
  }
  return data;
}

}  // namespace lqr_rpi
