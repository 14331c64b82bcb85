// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lqr_rpi/cli/commands.hpp"
#include "lqr_rpi/cli/config.hpp"
#include "lqr_rpi/datadriven.hpp"
#include "lqr_rpi/errors.hpp"
#include "lqr_rpi/lyapunov.hpp"
#include "lqr_rpi/policy_iteration.hpp"
#include "lqr_rpi/riccati.hpp"
#include "support/oracles.hpp"

using namespace lqr_rpi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "lqr_rpi_acceptance";
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Tank {
  LtiSystem sys = oracle::stirred_tank();
  LqrCost cost = oracle::unit_cost(2, 2);
  AreSolution sol = solve_are(sys, cost, MatrixXd::Zero(2, 2));
};

// K* plus a perturbation of spectral norm 0.05 ||K*||_2.
MatrixXd near_gain(const Tank& t, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    KeyedRng rng{seed, attempt};
    const MatrixXd d = rng.normal_matrix(2, 2);
    const MatrixXd k = t.sol.k_star + 0.05 * oracle::spectral_norm(t.sol.k_star) /
                                          oracle::spectral_norm(d) * d;
    if (t.sys.is_stabilizing(k)) return k;
  }
}

// 1. ARE oracle
Outcome criterion1() {
  const auto t0 = Clock::now();
  const LtiSystem scalar(MatrixXd::Constant(1, 1, -1.0), MatrixXd::Ones(1, 1));
  const AreSolution s = solve_are(scalar, oracle::unit_cost(1, 1), MatrixXd::Zero(1, 1));
  const double scalar_err = std::abs(s.p_star(0, 0) - (std::sqrt(2.0) - 1.0));
  const Tank tank;
  const double res = are_residual(tank.sys, tank.cost, tank.sol.p_star).frobenius();
  const double dt = seconds_since(t0);
  Outcome o;
  o.pass = scalar_err < 1e-10 && res < 1e-10 && dt < 1.0;
  o.detail = "|p-p*|=" + fmt("%.2e", scalar_err) + " tank residual=" + fmt("%.2e", res) +
             " runtime=" + fmt("%.3fs", dt);
  return o;
}

struct PiCheck {
  bool ok = true;
  double worst_psd = 0.0;
  int iters = 0;  // first iteration with ||P_i - P*||_F < 1e-8, 99 if never
};

PiCheck check_exact_run(const oracle::Instance& inst) {
  PiCheck c;
  const MatrixXd k1 = find_stabilizing_gain(inst.sys);
  const AreSolution sol = solve_are(inst.sys, inst.cost, k1);
  const ExactRun run = pi_exact_run(inst.sys, inst.cost, k1, 0.0, 30, sol.p_star);
  int hit = -1;
  for (std::size_t i = 0; i < run.iterates.size(); ++i) {
    const PiIterate& it = run.iterates[i];
    c.ok = c.ok && is_hurwitz(inst.sys.closed_loop(it.k));
    double e = (it.p - sol.p_star).min_eigenvalue();
    if (i + 1 < run.iterates.size()) e = std::min(e, (it.p - run.iterates[i + 1].p).min_eigenvalue());
    c.worst_psd = std::min(c.worst_psd, e);
    if (hit < 0 && it.err_to_opt < 1e-8) hit = it.index;
  }
  c.ok = c.ok && c.worst_psd >= -1e-9 && hit > 0;
  c.iters = hit < 0 ? 99 : hit;
  return c;
}

// 2. exact PI on random controllable systems. The suite draws from systems
// with controllability sigma_min/sigma_max >= 0.1; the ungated draws are
// reported alongside because near-uncontrollable pairs have ||P*|| up to
// 1e6, where the absolute tolerances sit below the rounding floor.
Outcome criterion2() {
  const auto t0 = Clock::now();
  int failures = 0, rejected = 0, worst_iters = 0;
  double worst_psd = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const PiCheck c = check_exact_run(oracle::random_instance(1000 + s, 5, 2, 0.1, &rejected));
    worst_psd = std::min(worst_psd, c.worst_psd);
    worst_iters = std::max(worst_iters, c.iters);
    if (!c.ok) ++failures;
  }
  const double dt = seconds_since(t0);
  int ungated_failures = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    if (!check_exact_run(oracle::random_instance(1000 + s, 5, 2)).ok) ++ungated_failures;
  }
  Outcome o;
  o.pass = failures == 0 && dt < 30.0;
  o.detail = "systems failing=" + std::to_string(failures) + "/50 (gate rejected " +
             std::to_string(rejected) + " draws) min PSD eig=" + fmt("%.2e", worst_psd) +
             " max iterations to 1e-8=" + std::to_string(worst_iters) +
             " runtime=" + fmt("%.2fs", dt) + "; ungated draws failing=" +
             std::to_string(ungated_failures) + "/50";
  return o;
}

// 3. quadratic contraction of the one-step map
Outcome criterion3() {
  const Tank t;
  const ContractionEstimate big = estimate_contraction(t.sys, t.cost, t.sol.p_star, 1e-3, 500, 17);
  const ContractionEstimate small = estimate_contraction(t.sys, t.cost, t.sol.p_star, 1e-4, 500, 17);
  const double q = big.sigma_hat / small.sigma_hat;
  Outcome o;
  o.pass = big.sigma_hat < 1.0 && small.sigma_hat < 1.0 && q >= 2.0 && q <= 50.0;
  o.detail = "sigma(1e-3)=" + fmt("%.3e", big.sigma_hat) + " sigma(1e-4)=" +
             fmt("%.3e", small.sigma_hat) + " quotient=" + fmt("%.2f", q) +
             " excluded=" + std::to_string(big.excluded + small.excluded);
  return o;
}

struct RobustSuite {
  std::vector<RobustRun> fixed_runs[3];
  std::vector<RobustRun> decaying_runs;
};

const double kScales[3] = {1e-4, 1e-3, 1e-2};
constexpr int kFixedIters = 30;
constexpr int kDecayIters = 50;

RobustSuite robust_suite() {
  const Tank t;
  const MatrixXd k1 = near_gain(t, 0);
  RobustSuite suite;
  for (int s = 0; s < 3; ++s) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      DisturbanceSpec spec;
      spec.mode = DisturbanceMode::kFixedNorm;
      spec.norm_bound = kScales[s];
      spec.seed = seed;
      suite.fixed_runs[s].push_back(pi_robust_run(t.sys, t.cost, k1, spec, kFixedIters, t.sol.p_star));
    }
  }
  for (DecayKind kind : {DecayKind::kGeometric, DecayKind::kInverseSquare}) {
    for (double scale : kScales) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        DisturbanceSpec spec;
        spec.mode = DisturbanceMode::kDecaying;
        spec.decay = kind;
        spec.norm_bound = scale;
        spec.rate = 0.5;
        spec.seed = 100 + seed;
        suite.decaying_runs.push_back(pi_robust_run(t.sys, t.cost, k1, spec, kDecayIters, t.sol.p_star));
      }
    }
  }
  return suite;
}

// Bounded trace: every error finite and ||P~_i||_F <= 6 ||P~_1||_F.
bool trace_bounded(const RobustRun& r) {
  for (double e : r.report.error_trace) {
    if (!std::isfinite(e)) return false;
  }
  return r.report.bounded_ok;
}

// 4. ISS behavior of robust PI
Outcome criterion4(const RobustSuite& suite) {
  Outcome o;
  double means[3];
  bool stab = true, bounded = true;
  for (int s = 0; s < 3; ++s) {
    double sum = 0.0;
    for (const RobustRun& r : suite.fixed_runs[s]) {
      stab = stab && !r.stability_lost;
      bounded = bounded && trace_bounded(r);
      sum += r.report.ultimate_error;
    }
    means[s] = sum / static_cast<double>(suite.fixed_runs[s].size());
  }
  const bool monotone = means[0] <= means[1] && means[1] <= means[2];
  double worst_decay = 0.0;
  for (const RobustRun& r : suite.decaying_runs) {
    stab = stab && !r.stability_lost;
    worst_decay = std::max(worst_decay, r.iterates.back().err_to_opt);
  }
  o.pass = stab && bounded && monotone && worst_decay < 1e-6;
  o.detail = std::string("all stabilizing=") + (stab ? "yes" : "no") + " bounded=" +
             (bounded ? "yes" : "no") + " mean ultimate_error=" + fmt("%.3e", means[0]) + "," +
             fmt("%.3e", means[1]) + "," + fmt("%.3e", means[2]) +
             " worst decaying final err=" + fmt("%.3e", worst_decay);
  return o;
}

// 5. margin safeguard and boundedness under the (1+i^2)^-1 a_i schedule
Outcome criterion5(const RobustSuite& suite) {
  std::vector<const RobustRun*> all;
  for (const auto& group : suite.fixed_runs) {
    for (const RobustRun& r : group) all.push_back(&r);
  }
  for (const RobustRun& r : suite.decaying_runs) all.push_back(&r);
  int hyp = 0, violations = 0, scheduled = 0, unbounded = 0;
  for (const RobustRun* r : all) {
    hyp += r->report.margin_hypothesis_count;
    violations += r->report.margin_violations;
    if (r->report.schedule_hypothesis) {
      ++scheduled;
      if (!r->report.bounded_ok) ++unbounded;
    }
  }
  Outcome o;
  o.pass = violations == 0 && hyp > 0 && scheduled > 0 && unbounded == 0;
  o.detail = "iterates under margin=" + std::to_string(hyp) + " violations=" +
             std::to_string(violations) + " runs on schedule=" + std::to_string(scheduled) + "/" +
             std::to_string(all.size()) + " unbounded=" + std::to_string(unbounded);
  return o;
}

// Largest gap between data-driven and exact iterates from iteration 6 on.
double offpolicy_gap(const Tank& t, const SinusoidSignal& u, int substeps, bool* rank_ok) {
  const int n_iter = 8;
  const DataRun run = pi_data_run(t.sys, t.cost, MatrixXd::Zero(2, 2), u, std::nullopt,
                                  VectorXd::Ones(2), 140, 0.1, substeps, n_iter, t.sol.p_star);
  const ExactRun ex = pi_exact_run(t.sys, t.cost, MatrixXd::Zero(2, 2), 0.0, n_iter);
  if (rank_ok) *rank_ok = rank_condition(run.data);
  double gap = 0.0;
  for (int i = 5; i < n_iter; ++i) {
    const auto k = static_cast<std::size_t>(i);
    gap = std::max(gap, (run.iterates[k].p_hat - ex.iterates[k].p).frobenius());
    gap = std::max(gap, (run.iterates[k].k_next - ex.iterates[k].k_next).norm());
  }
  return gap;
}

// 6. off-policy equivalence on noise-free data
Outcome criterion6() {
  const Tank t;
  // Input realization of the shipped pi-data config (master seed 1).
  const SinusoidSignal u = SinusoidSignal::sample(0.2, 2, 100, -500, 500, cli::derive_seed(1, 2));
  bool rank_ok = false;
  const double g50 = offpolicy_gap(t, u, 50, &rank_ok);
  const double g100 = offpolicy_gap(t, u, 100, nullptr);
  const double ratio = g50 / g100;
  Outcome o;
  o.pass = rank_ok && g50 < 1e-4 && ratio >= 8.0;
  o.detail = std::string("rank_ok=") + (rank_ok ? "yes" : "no") + " gap(50)=" + fmt("%.3e", g50) +
             " gap(100)=" + fmt("%.3e", g100) + " halving ratio=" + fmt("%.1f", ratio);
  return o;
}

std::string config_path(const std::string& name) {
  return (fs::path(LQR_RPI_CONFIG_DIR) / name).string();
}

// 7. four-cell experiment across three master seeds
Outcome criterion7(const fs::path& dir) {
  Outcome o;
  double slowest = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    std::ostringstream out, err;
    const auto t0 = Clock::now();
    const int code = cli::run_cli("fig1", config_path("fig1.json"),
                                  (dir / ("fig1_seed" + std::to_string(seed))).string(), seed, out, err);
    const double dt = seconds_since(t0);
    slowest = std::max(slowest, dt);
    bool stab = false, near = false, far = false;
    if (code == 0 || code == 1) {
      const auto s = nlohmann::json::parse(out.str());
      stab = s["stabilizing_all"].get<bool>();
      near = s["ordering_near"].get<bool>();
      far = s["ordering_far"].get<bool>();
      o.detail += "seed " + std::to_string(seed) + ": stabilizing=" + (stab ? "yes" : "no") +
                  " order near/far=" + (near ? "yes" : "no") + "/" + (far ? "yes" : "no") +
                  " err(a,b,c,d)=";
      for (const auto& c : s["cells"]) o.detail += fmt("%.2e ", c["final_err_to_opt"].get<double>());
      o.detail += "; ";
    } else {
      o.detail += "seed " + std::to_string(seed) + ": exit " + std::to_string(code) + " " + err.str() + "; ";
    }
    o.pass = o.pass && stab && near && far && dt < 60.0;
  }
  o.detail += "slowest run=" + fmt("%.1fs", slowest);
  return o;
}

// 8. Lyapunov operator properties
Outcome criterion8() {
  const auto t0 = Clock::now();
  int bad_integral = 0, bad_norm = 0, bad_mono = 0, bad_perturb = 0, bad_scaled = 0, scaled_checked = 0;
  double worst_integral = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    KeyedRng rng{0x1a9, s};
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(s % 4);
    const MatrixXd x = oracle::random_hurwitz(rng, n);
    const SymMatrix z(rng.normal_matrix(n, n));
    const SymMatrix y = lyap_solve(x, z);

    const double gap = (oracle::lyap_integral(x, z.matrix(), 1e-10) - y.matrix()).norm();
    worst_integral = std::max(worst_integral, gap);
    if (gap > 1e-6) ++bad_integral;

    const double inv_norm = lyap_inverse_norm(x);
    for (int p = 0; p < 20; ++p) {
      const SymMatrix probe(rng.normal_matrix(n, n));
      if (lyap_solve(x, probe).frobenius() > inv_norm * probe.frobenius() * (1 + 1e-9)) ++bad_norm;
    }

    const SymMatrix d(oracle::random_psd(rng, n, 1 + static_cast<Eigen::Index>(s % n)));
    if ((lyap_solve(x, z + d) - y).min_eigenvalue() < -1e-9) ++bad_mono;

    // Perturbation bound with H = lyap_solve(X, I) and small random changes.
    {
      const MatrixXd dx = 1e-3 * rng.normal_matrix(n, n);
      const SymMatrix dz(1e-3 * rng.normal_matrix(n, n));
      if (is_hurwitz(x + dx)) {
        const SymMatrix y2 = lyap_solve(x + dx, z + dz);
        const double h = oracle::spectral_norm(lyap_solve(x, SymMatrix::identity(n)));
        const double lhs = oracle::spectral_norm((y2 - y).matrix());
        const double rhs = (oracle::spectral_norm(dz) + 2 * oracle::spectral_norm(dx) * oracle::spectral_norm(y2)) * h;
        if (lhs > rhs + 1e-9) ++bad_perturb;
      }
    }

    // Scaled perturbation bound, gamma drawn where its hypotheses hold.
    if (z.frobenius() > 0.0) {
      const double xf = x.norm();
      const double gamma = rng.uniform(0.01, 1.0) * 0.25 / (xf * inv_norm);
      const MatrixXd ex = rng.normal_matrix(n, n);
      const SymMatrix ez(rng.normal_matrix(n, n));
      const MatrixXd dx = rng.uniform() * gamma * xf / ex.norm() * ex;
      const SymMatrix dz = (rng.uniform() * gamma * z.frobenius() / ez.frobenius()) * ez;
      if (dx.norm() <= gamma * xf && dz.frobenius() <= gamma * z.frobenius() &&
          gamma * xf * inv_norm <= 0.25) {
        ++scaled_checked;
        try {
          const SymMatrix y2 = lyap_solve(x + dx, z + dz);
          if ((y2 - y).frobenius() > 8 * gamma * xf * inv_norm * y.frobenius() + 1e-9) ++bad_scaled;
        } catch (const Error&) {
          ++bad_scaled;
        }
      }
    }
  }
  const double dt = seconds_since(t0);
  Outcome o;
  o.pass = bad_integral + bad_norm + bad_mono + bad_perturb + bad_scaled == 0 && scaled_checked > 0 && dt < 60.0;
  o.detail = "integral gap max=" + fmt("%.2e", worst_integral) + " failures integral/norm/mono/perturb/scaled=" +
             std::to_string(bad_integral) + "/" + std::to_string(bad_norm) + "/" +
             std::to_string(bad_mono) + "/" + std::to_string(bad_perturb) + "/" + std::to_string(bad_scaled) +
             " (scaled checked " + std::to_string(scaled_checked) + ") runtime=" + fmt("%.2fs", dt);
  return o;
}

// 9. byte-identical CSV outputs on reruns
Outcome criterion9(const fs::path& dir) {
  int files = 0, differing = 0;
  std::string bad;
  const std::pair<const char*, const char*> runs[] = {
      {"are", "scalar_are.json"},          {"are", "stirred_tank_are.json"},
      {"pi-exact", "scalar_pi_exact.json"}, {"pi-robust", "stirred_tank_pi_robust.json"},
      {"pi-data", "stirred_tank_pi_data.json"}, {"fig1", "fig1.json"}};
  for (const auto& [sub, cfg] : runs) {
    const std::string stem = fs::path(cfg).stem().string();
    for (const char* rep : {"first", "second"}) {
      const fs::path sub_dir = dir / "det" / rep;
      fs::create_directories(sub_dir);
      std::ostringstream out, err;
      cli::run_cli(sub, config_path(cfg), (sub_dir / stem).string(), std::nullopt, out, err);
    }
  }
  for (const auto& entry : fs::directory_iterator(dir / "det" / "first")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path twin = dir / "det" / "second" / entry.path().filename();
    if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) {
      ++differing;
      bad += " " + entry.path().filename().string();
    }
  }
  Outcome o;
  o.pass = files > 0 && differing == 0;
  o.detail = "csv files compared=" + std::to_string(files) + " differing=" + std::to_string(differing) + bad;
  return o;
}

}  // namespace

int main() {
  const fs::path dir = scratch_dir();
  int failed = 0;
  auto report = [&](int id, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d: %s (%.2fs) %s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  RobustSuite suite;
  report(4, [&] {
    suite = robust_suite();
    return criterion4(suite);
  });
  report(5, [&] { return criterion5(suite); });
  report(6, criterion6);
  report(7, [&] { return criterion7(dir); });
  report(8, criterion8);
  report(9, [&] { return criterion9(dir); });

  fs::remove_all(dir);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
