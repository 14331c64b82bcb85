#include "lqr_rpi/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <future>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "lqr_rpi/csv.hpp"
#include "lqr_rpi/datadriven.hpp"
#include "lqr_rpi/lyapunov.hpp"
#include "lqr_rpi/random.hpp"
#include "lqr_rpi/riccati.hpp"

namespace lqr_rpi::cli {

using nlohmann::ordered_json;

namespace {

enum SeedStream : std::uint64_t {
  kStreamDisturbance = 1,
  kStreamInput = 2,
  kStreamNoise = 3,
  kStreamNearGain = 4,
};

struct Problem {
  LtiSystem sys;
  LqrCost cost;
};

Problem make_problem(const ExperimentConfig& cfg) {
  return {LtiSystem(cfg.a, cfg.b), LqrCost(SymMatrix(cfg.q), SymMatrix(cfg.r))};
}

std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a_hex(mode_name(cfg.mode) + "|" + std::to_string(cfg.seed) + "|" +
                   cfg.canonical);
}

std::vector<std::string> comment_lines(const ExperimentConfig& cfg) {
  return {"lqr-rpi " + mode_name(cfg.mode) + " config_hash=" + config_hash(cfg)};
}

ordered_json matrix_json(const MatrixXd& x) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < x.cols(); ++j) row.push_back(x(i, j));
    rows.push_back(row);
  }
  return rows;
}

// JSON has no inf/nan; those become strings.
ordered_json number_json(double x) {
  if (std::isfinite(x)) return x;
  return csv::format_double(x);
}

MatrixXd resolve_k1(const std::optional<MatrixXd>& k1, const LtiSystem& sys,
                    const char* what) {
  MatrixXd k = k1 ? *k1 : find_stabilizing_gain(sys);
  if (!sys.is_stabilizing(k)) {
    throw ConfigError(std::string(what) + " is not stabilizing");
  }
  return k;
}

AreSolution oracle(const Problem& pb, const MatrixXd& k1) {
  return solve_are(pb.sys, pb.cost, k1, 1e-12, 200);
}

void write_pi_trace(const std::string& path, const std::vector<PiIterate>& its,
                    const std::vector<std::string>& comments) {
  MatrixXd rows(static_cast<Eigen::Index>(its.size()), 5);
  for (std::size_t i = 0; i < its.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    rows(r, 0) = its[i].index;
    rows(r, 1) = its[i].err_to_opt;
    rows(r, 2) = its[i].delta_g_norm;
    rows(r, 3) = its[i].next_stabilizing ? 1.0 : 0.0;
    rows(r, 4) = its[i].p.frobenius();
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  for (const auto& c : comments) os << "# " << c << '\n';
  csv::write_row(os, {"i", "err_to_opt", "delta_G_norm", "hurwitz_flag", "P_fro"});
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    csv::write_row(os, {std::to_string(its[static_cast<std::size_t>(r)].index),
                        csv::format_double(rows(r, 1)), csv::format_double(rows(r, 2)),
                        rows(r, 3) != 0.0 ? "1" : "0", csv::format_double(rows(r, 4))});
  }
}

void write_data_trace(const std::string& path,
                      const std::vector<DataDrivenIterate>& its,
                      const std::vector<std::string>& comments) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  for (const auto& c : comments) os << "# " << c << '\n';
  csv::write_row(os, {"i", "err_to_opt", "rank_ok", "hurwitz_flag", "P_fro",
                      "P_hat_err", "lsq_residual", "theta_cond"});
  for (const auto& it : its) {
    csv::write_row(os, {std::to_string(it.index), csv::format_double(it.err_to_opt),
                        it.rank_ok ? "1" : "0", it.next_stabilizing ? "1" : "0",
                        csv::format_double(it.p_hat.frobenius()),
                        csv::format_double(it.p_hat_err),
                        csv::format_double(it.lsq_residual),
                        csv::format_double(it.theta_cond)});
  }
}

bool all_stabilizing(const std::vector<DataDrivenIterate>& its) {
  for (const auto& it : its) {
    if (!it.gain_stabilizing || !it.next_stabilizing) return false;
  }
  return true;
}

bool all_rank_ok(const std::vector<DataDrivenIterate>& its) {
  for (const auto& it : its) {
    if (!it.rank_ok) return false;
  }
  return true;
}

SinusoidSignal make_signal(const SignalConfig& s, Eigen::Index channels,
                           std::uint64_t master, std::uint64_t stream) {
  return SinusoidSignal::sample(s.amplitude, channels, s.count, s.lo, s.hi,
                                s.seed ? *s.seed : derive_seed(master, stream));
}

int cmd_solve_are(const ExperimentConfig& cfg, const std::string& prefix,
                  ordered_json& summary) {
  const Problem pb = make_problem(cfg);
  const MatrixXd k1 = resolve_k1(cfg.k1, pb.sys, "K1");
  const AreSolution sol = solve_are(pb.sys, pb.cost, k1, cfg.tol, cfg.max_iter);

  const std::string path = prefix + "_are.csv";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  for (const auto& c : comment_lines(cfg)) os << "# " << c << '\n';
  csv::write_row(os, {"quantity", "row", "col", "value"});
  auto dump = [&](const char* name, const MatrixXd& x) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        csv::write_row(os, {name, std::to_string(i), std::to_string(j),
                            csv::format_double(x(i, j))});
  };
  dump("P", sol.p_star.matrix());
  dump("K", sol.k_star);
  csv::write_row(os, {"residual", "0", "0", csv::format_double(sol.residual_norm)});

  const bool ok = sol.residual_norm < cfg.residual_tol;
  summary["iterations"] = sol.iterations;
  summary["residual_norm"] = sol.residual_norm;
  summary["stabilizing_all"] = pb.sys.is_stabilizing(sol.k_star);
  summary["outputs"] = {path};
  return ok ? kExitOk : kExitNumericalFailure;
}

int cmd_pi_exact(const ExperimentConfig& cfg, const std::string& prefix,
                 ordered_json& summary) {
  const Problem pb = make_problem(cfg);
  const MatrixXd k1 = resolve_k1(cfg.k1, pb.sys, "K1");
  const AreSolution sol = oracle(pb, k1);
  const ExactRun run = pi_exact_run(pb.sys, pb.cost, k1, cfg.tol, cfg.max_iter, sol.p_star);

  const std::string path = prefix + "_trace.csv";
  write_pi_trace(path, run.iterates, comment_lines(cfg));
  bool stab = true;
  for (const auto& it : run.iterates) stab = stab && it.next_stabilizing;
  summary["iterations"] = run.iterates.size();
  summary["converged"] = run.converged;
  summary["final_err_to_opt"] = number_json(run.iterates.back().err_to_opt);
  summary["stabilizing_all"] = stab;
  summary["outputs"] = {path};
  if (!stab) return kExitTheoryViolation;
  return run.converged ? kExitOk : kExitNumericalFailure;
}

int cmd_pi_robust(const ExperimentConfig& cfg, const std::string& prefix,
                  ordered_json& summary) {
  const Problem pb = make_problem(cfg);
  const MatrixXd k1 = resolve_k1(cfg.k1, pb.sys, "K1");
  const AreSolution sol = oracle(pb, k1);
  DisturbanceSpec spec = cfg.disturbance;
  if (!cfg.disturbance_seed_given) spec.seed = derive_seed(cfg.seed, kStreamDisturbance);
  const RobustRun run = pi_robust_run(pb.sys, pb.cost, k1, spec, cfg.n_iter, sol.p_star);

  const std::string path = prefix + "_trace.csv";
  write_pi_trace(path, run.iterates, comment_lines(cfg));
  const IssReport& rep = run.report;
  summary["iterations"] = run.iterates.size();
  summary["status"] = run.status;
  summary["final_err_to_opt"] = number_json(run.iterates.back().err_to_opt);
  summary["stabilizing_all"] = !run.stability_lost;
  summary["sigma_hat"] = number_json(rep.sigma_hat);
  summary["ultimate_error"] = number_json(rep.ultimate_error);
  summary["margins_ok"] = rep.margins_ok;
  summary["margin_hypothesis_count"] = rep.margin_hypothesis_count;
  summary["schedule_hypothesis"] = rep.schedule_hypothesis;
  summary["bounded_ok"] = rep.bounded_ok;
  summary["disturbance_seed"] = spec.seed;
  summary["outputs"] = {path};
  return run.stability_lost ? kExitTheoryViolation : kExitOk;
}

int cmd_pi_data(const ExperimentConfig& cfg, const std::string& prefix,
                ordered_json& summary) {
  const Problem pb = make_problem(cfg);
  const MatrixXd k1 = resolve_k1(cfg.k1, pb.sys, "K1");
  const AreSolution sol = oracle(pb, k1);
  const DataConfig& dc = cfg.data;
  const SinusoidSignal u = make_signal(dc.input, pb.sys.m(), cfg.seed, kStreamInput);
  std::optional<SinusoidSignal> w;
  if (dc.noise) w = make_signal(*dc.noise, pb.sys.n(), cfg.seed, kStreamNoise);
  const VectorXd x0 = dc.x0 ? *dc.x0 : VectorXd::Ones(pb.sys.n());

  const DataRun run = pi_data_run(pb.sys, pb.cost, k1, u, w, x0, dc.samples, dc.dt,
                                  dc.substeps, cfg.n_iter, sol.p_star);

  const std::string path = prefix + "_trace.csv";
  write_data_trace(path, run.iterates, comment_lines(cfg));
  ordered_json extra;
  extra["input_seed"] = u.seed;
  extra["noise_seed"] = w ? ordered_json(w->seed) : ordered_json(nullptr);
  extra["substeps"] = dc.substeps;
  extra["config_hash"] = config_hash(cfg);
  write_trajectory_bundle(run.data, prefix + "_data", extra.dump());

  const bool stab = all_stabilizing(run.iterates);
  const bool rank_ok = all_rank_ok(run.iterates);
  summary["iterations"] = run.iterates.size();
  summary["final_err_to_opt"] = number_json(run.iterates.back().err_to_opt);
  summary["final_p_hat_err"] = number_json(run.iterates.back().p_hat_err);
  summary["stabilizing_all"] = stab;
  summary["rank_ok"] = rank_ok;
  summary["outputs"] = {path, prefix + "_data_data.json"};
  return stab && rank_ok ? kExitOk : kExitTheoryViolation;
}

MatrixXd near_gain(const ExperimentConfig& cfg, const LtiSystem& sys,
                   const MatrixXd& k_star) {
  if (cfg.fig1.k1_near) return *cfg.fig1.k1_near;
  const double target = cfg.fig1.near_scale *
                        Eigen::JacobiSVD<MatrixXd>(k_star).singularValues()(0);
  const std::uint64_t seed = derive_seed(cfg.seed, kStreamNearGain);
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    KeyedRng rng{seed, attempt};
    const MatrixXd d = rng.normal_matrix(k_star.rows(), k_star.cols());
    const double dn = Eigen::JacobiSVD<MatrixXd>(d).singularValues()(0);
    const MatrixXd k = k_star + (target / dn) * d;
    if (sys.is_stabilizing(k)) return k;
  }
  throw NumericalError("fig1: no stabilizing near gain found");
}

// find_stabilizing_gain, pushed along B^T P_s (P_s the Lyapunov certificate
// of its closed loop) until it is farther than ||K*||_F from K*. Every point
// on that ray keeps the same certificate, so the result stays stabilizing.
MatrixXd far_gain(const ExperimentConfig& cfg, const LtiSystem& sys,
                  const MatrixXd& k_star) {
  if (cfg.fig1.k1_far) return *cfg.fig1.k1_far;
  const MatrixXd base = find_stabilizing_gain(sys);
  const double knorm = k_star.norm();
  if ((base - k_star).norm() > knorm) return base;
  const SymMatrix ps = lyap_solve(sys.closed_loop(base), SymMatrix::identity(sys.n()));
  const MatrixXd dir = sys.b().transpose() * ps.matrix();
  for (double c = 1.0; c < 1e6; c *= 1.5) {
    const MatrixXd k = base + c * dir;
    if ((k - k_star).norm() > knorm && sys.is_stabilizing(k)) return k;
  }
  throw NumericalError("fig1: could not construct a far stabilizing gain");
}

int cmd_fig1(const ExperimentConfig& cfg, const std::string& prefix,
             ordered_json& summary) {
  const Problem pb = make_problem(cfg);
  const AreSolution sol = oracle(pb, find_stabilizing_gain(pb.sys));
  const MatrixXd k_near = near_gain(cfg, pb.sys, sol.k_star);
  const MatrixXd k_far = far_gain(cfg, pb.sys, sol.k_star);
  if (!pb.sys.is_stabilizing(k_near) || !pb.sys.is_stabilizing(k_far)) {
    throw ConfigError("fig1: initial gains must be stabilizing");
  }

  const DataConfig& dc = cfg.data;
  const SinusoidSignal u = make_signal(dc.input, pb.sys.m(), cfg.seed, kStreamInput);
  const SinusoidSignal w = make_signal(cfg.fig1.noise, pb.sys.n(), cfg.seed, kStreamNoise);
  const VectorXd x0 = dc.x0 ? *dc.x0 : VectorXd::Ones(pb.sys.n());

  struct Cell {
    const char* panel;
    const char* start;
    const MatrixXd* k1;
    double xi;
  };
  const std::vector<Cell> cells{{"a", "near", &k_near, cfg.fig1.xi[0]},
                                {"b", "far", &k_far, cfg.fig1.xi[0]},
                                {"c", "near", &k_near, cfg.fig1.xi[1]},
                                {"d", "far", &k_far, cfg.fig1.xi[1]}};

  std::vector<std::future<DataRun>> jobs;
  for (const Cell& c : cells) {
    jobs.push_back(std::async(std::launch::async, [&, c] {
      return pi_data_run(pb.sys, pb.cost, *c.k1, u, w.scaled(c.xi), x0, dc.samples,
                         dc.dt, dc.substeps, cfg.n_iter, sol.p_star);
    }));
  }
  std::vector<DataRun> runs;
  for (auto& j : jobs) runs.push_back(j.get());

  ordered_json cell_json = ordered_json::array();
  ordered_json outputs = ordered_json::array();
  std::vector<double> final_err;
  bool stab_all = true;
  bool rank_all = true;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string path = prefix + "_fig1_" + cells[i].panel + ".csv";
    write_data_trace(path, runs[i].iterates, comment_lines(cfg));
    outputs.push_back(path);
    const bool stab = all_stabilizing(runs[i].iterates);
    const bool rank_ok = all_rank_ok(runs[i].iterates);
    stab_all = stab_all && stab;
    rank_all = rank_all && rank_ok;
    final_err.push_back(runs[i].iterates.back().err_to_opt);
    cell_json.push_back({{"panel", cells[i].panel},
                         {"initial_gain", cells[i].start},
                         {"xi", cells[i].xi},
                         {"final_err_to_opt", number_json(final_err.back())},
                         {"stabilizing_all", stab},
                         {"rank_ok", rank_ok}});
  }
  const bool order_near = final_err[0] < final_err[2];
  const bool order_far = final_err[1] < final_err[3];

  summary["iterations"] = cfg.n_iter;
  summary["K_star"] = matrix_json(sol.k_star);
  summary["K1_near"] = matrix_json(k_near);
  summary["K1_far"] = matrix_json(k_far);
  summary["K1_far_distance_ratio"] = (k_far - sol.k_star).norm() / sol.k_star.norm();
  summary["input_seed"] = u.seed;
  summary["noise_seed"] = w.seed;
  summary["cells"] = cell_json;
  summary["stabilizing_all"] = stab_all;
  summary["rank_ok"] = rank_all;
  summary["ordering_near"] = order_near;
  summary["ordering_far"] = order_far;
  summary["final_err_to_opt"] = number_json(final_err.back());
  summary["outputs"] = outputs;
  return stab_all && order_near && order_far ? kExitOk : kExitTheoryViolation;
}

void emit_summary(const ordered_json& summary, const std::string& prefix,
                  std::ostream& out) {
  const std::string line = summary.dump();
  out << line << '\n';
  std::ofstream log(prefix + "_summary.jsonl", std::ios::app | std::ios::binary);
  if (log) log << line << '\n';
}

}  // namespace

int run_command(const ExperimentConfig& cfg, const std::string& prefix,
                std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  ordered_json summary;
  summary["mode"] = mode_name(cfg.mode);
  summary["config_hash"] = config_hash(cfg);
  summary["seed"] = cfg.seed;
  int code = kExitOk;
  switch (cfg.mode) {
    case Mode::kAre: code = cmd_solve_are(cfg, prefix, summary); break;
    case Mode::kPiExact: code = cmd_pi_exact(cfg, prefix, summary); break;
    case Mode::kPiRobust: code = cmd_pi_robust(cfg, prefix, summary); break;
    case Mode::kPiData: code = cmd_pi_data(cfg, prefix, summary); break;
    case Mode::kFig1: code = cmd_fig1(cfg, prefix, summary); break;
  }
  summary["exit_code"] = code;
  summary["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emit_summary(summary, prefix, out);
  return code;
}

int run_cli(const std::string& subcommand, const std::string& config_path,
            const std::optional<std::string>& out_prefix,
            const std::optional<std::uint64_t>& seed, std::ostream& out,
            std::ostream& err) {
  auto fail = [&](int code, const char* kind, const std::string& msg) {
    ordered_json rec;
    rec["error"] = kind;
    rec["message"] = msg;
    rec["exit_code"] = code;
    err << rec.dump() << '\n';
    return code;
  };
  try {
    ExperimentConfig cfg = load_config(config_path, parse_mode(subcommand));
    if (seed) cfg.seed = *seed;
    std::string prefix = out_prefix ? *out_prefix : cfg.output;
    if (prefix.empty()) prefix = "lqr_rpi_" + subcommand;
    return run_command(cfg, prefix, out);
  } catch (const ConfigError& e) {
    return fail(kExitConfigError, "config", e.what());
  } catch (const StabilityError& e) {
    return fail(kExitTheoryViolation, "stability", e.what());
  } catch (const Error& e) {
    return fail(kExitNumericalFailure, "numerical", e.what());
  } catch (const std::exception& e) {
    return fail(kExitNumericalFailure, "internal", e.what());
  }
}

}  // namespace lqr_rpi::cli
