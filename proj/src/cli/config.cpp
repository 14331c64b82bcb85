#include "lqr_rpi/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "lqr_rpi/riccati.hpp"

namespace lqr_rpi::cli {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return v.get<int>();
}

std::uint64_t get_seed(const json& v, const std::string& where) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    throw ConfigError(where + ": expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

MatrixXd get_matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError(where + ": expected a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = -1;
  MatrixXd x;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.empty()) {
      throw ConfigError(where + ": row " + std::to_string(i) + " is not a non-empty array");
    }
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      x.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(where + ": ragged rows");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      x(i, j) = get_number(row[static_cast<std::size_t>(j)], where);
    }
  }
  return x;
}

VectorXd get_vector(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array");
  VectorXd x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    x(static_cast<Eigen::Index>(i)) = get_number(v[i], where);
  }
  return x;
}

void expect_shape(const MatrixXd& x, Eigen::Index rows, Eigen::Index cols,
                  const std::string& where) {
  if (x.rows() != rows || x.cols() != cols) {
    throw ConfigError(where + ": expected " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", got " + std::to_string(x.rows()) +
                      "x" + std::to_string(x.cols()));
  }
}

std::optional<MatrixXd> get_gain(const json& v, const std::string& where) {
  if (v.is_string()) {
    if (v.get<std::string>() != "auto") throw ConfigError(where + ": expected \"auto\" or a matrix");
    return std::nullopt;
  }
  return get_matrix(v, where);
}

SignalConfig get_signal(const json& v, SignalConfig defaults, const std::string& where) {
  check_keys(v, {"amplitude", "count", "range", "seed"}, where);
  SignalConfig s = defaults;
  if (v.contains("amplitude")) s.amplitude = get_number(v["amplitude"], where + ".amplitude");
  if (v.contains("count")) s.count = get_int(v["count"], where + ".count");
  if (v.contains("range")) {
    const VectorXd r = get_vector(v["range"], where + ".range");
    if (r.size() != 2 || !(r(0) <= r(1))) throw ConfigError(where + ".range: expected [lo, hi]");
    s.lo = r(0);
    s.hi = r(1);
  }
  if (v.contains("seed")) s.seed = get_seed(v["seed"], where + ".seed");
  if (s.count < 0) throw ConfigError(where + ".count: must be >= 0");
  return s;
}

DisturbanceSpec get_disturbance(const json& v, bool& seed_given) {
  const std::string where = "disturbance";
  check_keys(v, {"mode", "norm_bound", "decay", "rate", "seed"}, where);
  DisturbanceSpec d;
  if (v.contains("mode")) {
    const std::string mode = v["mode"].is_string() ? v["mode"].get<std::string>() : "";
    if (mode == "none") d.mode = DisturbanceMode::kNone;
    else if (mode == "fixed_norm") d.mode = DisturbanceMode::kFixedNorm;
    else if (mode == "decaying") d.mode = DisturbanceMode::kDecaying;
    else throw ConfigError(where + ".mode: expected none, fixed_norm or decaying");
  }
  if (v.contains("norm_bound")) d.norm_bound = get_number(v["norm_bound"], where + ".norm_bound");
  if (v.contains("decay")) {
    const std::string kind = v["decay"].is_string() ? v["decay"].get<std::string>() : "";
    if (kind == "geometric") d.decay = DecayKind::kGeometric;
    else if (kind == "inverse_square") d.decay = DecayKind::kInverseSquare;
    else throw ConfigError(where + ".decay: expected geometric or inverse_square");
  }
  if (v.contains("rate")) d.rate = get_number(v["rate"], where + ".rate");
  if (v.contains("seed")) {
    d.seed = get_seed(v["seed"], where + ".seed");
    seed_given = true;
  }
  try {
    d.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return d;
}

}  // namespace

Mode parse_mode(const std::string& name) {
  if (name == "are") return Mode::kAre;
  if (name == "pi-exact") return Mode::kPiExact;
  if (name == "pi-robust") return Mode::kPiRobust;
  if (name == "pi-data") return Mode::kPiData;
  if (name == "fig1") return Mode::kFig1;
  throw ConfigError("unknown mode \"" + name + "\"");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kAre: return "are";
    case Mode::kPiExact: return "pi-exact";
    case Mode::kPiRobust: return "pi-robust";
    case Mode::kPiData: return "pi-data";
    case Mode::kFig1: return "fig1";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text, Mode mode) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  check_keys(doc, {"mode", "description", "system", "cost", "K1", "tol",
                   "residual_tol", "max_iter", "n_iter", "disturbance", "data",
                   "fig1", "seed", "output"},
             "config");

  ExperimentConfig cfg;
  cfg.mode = mode;
  if (doc.contains("mode")) {
    if (!doc["mode"].is_string()) throw ConfigError("mode: expected a string");
    if (parse_mode(doc["mode"].get<std::string>()) != mode) {
      throw ConfigError("config mode \"" + doc["mode"].get<std::string>() +
                        "\" does not match subcommand \"" + mode_name(mode) + "\"");
    }
  }
  if (doc.contains("description") && !doc["description"].is_string()) {
    throw ConfigError("description: expected a string");
  }

  const bool fig1 = mode == Mode::kFig1;
  if (doc.contains("system")) {
    check_keys(doc["system"], {"A", "B"}, "system");
    if (!doc["system"].contains("A") || !doc["system"].contains("B")) {
      throw ConfigError("system: A and B are required");
    }
    cfg.a = get_matrix(doc["system"]["A"], "system.A");
    cfg.b = get_matrix(doc["system"]["B"], "system.B");
  } else if (fig1) {
    cfg.a.resize(2, 2);
    cfg.a << -21.0, -20.0, 9.0, 8.0;
    cfg.b = MatrixXd::Identity(2, 2);
  } else {
    throw ConfigError("config: system is required");
  }
  const Eigen::Index n = cfg.a.rows();
  expect_shape(cfg.a, n, n, "system.A");
  if (cfg.b.rows() != n) throw ConfigError("system.B: expected " + std::to_string(n) + " rows");
  const Eigen::Index m = cfg.b.cols();

  if (doc.contains("cost")) {
    check_keys(doc["cost"], {"Q", "R"}, "cost");
    if (!doc["cost"].contains("Q") || !doc["cost"].contains("R")) {
      throw ConfigError("cost: Q and R are required");
    }
    cfg.q = get_matrix(doc["cost"]["Q"], "cost.Q");
    cfg.r = get_matrix(doc["cost"]["R"], "cost.R");
  } else if (fig1) {
    cfg.q = MatrixXd::Identity(n, n);
    cfg.r = MatrixXd::Identity(m, m);
  } else {
    throw ConfigError("config: cost is required");
  }
  expect_shape(cfg.q, n, n, "cost.Q");
  expect_shape(cfg.r, m, m, "cost.R");

  if (doc.contains("K1")) {
    cfg.k1 = get_gain(doc["K1"], "K1");
    if (cfg.k1) expect_shape(*cfg.k1, m, n, "K1");
  }
  if (doc.contains("tol")) cfg.tol = get_number(doc["tol"], "tol");
  if (doc.contains("residual_tol")) cfg.residual_tol = get_number(doc["residual_tol"], "residual_tol");
  if (doc.contains("max_iter")) cfg.max_iter = get_int(doc["max_iter"], "max_iter");
  if (doc.contains("n_iter")) cfg.n_iter = get_int(doc["n_iter"], "n_iter");
  if (!(cfg.tol > 0.0) || !(cfg.residual_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (cfg.max_iter < 1 || cfg.n_iter < 1) throw ConfigError("max_iter and n_iter must be >= 1");
  if (doc.contains("disturbance")) {
    cfg.disturbance = get_disturbance(doc["disturbance"], cfg.disturbance_seed_given);
  }

  if (doc.contains("data")) {
    const json& d = doc["data"];
    check_keys(d, {"M", "dt", "substeps", "x0", "input", "noise"}, "data");
    if (d.contains("M")) cfg.data.samples = get_int(d["M"], "data.M");
    if (d.contains("dt")) cfg.data.dt = get_number(d["dt"], "data.dt");
    if (d.contains("substeps")) cfg.data.substeps = get_int(d["substeps"], "data.substeps");
    if (d.contains("x0")) {
      cfg.data.x0 = get_vector(d["x0"], "data.x0");
      if (cfg.data.x0->size() != n) throw ConfigError("data.x0: expected length " + std::to_string(n));
    }
    if (d.contains("input")) cfg.data.input = get_signal(d["input"], cfg.data.input, "data.input");
    if (d.contains("noise") && !d["noise"].is_null()) {
      cfg.data.noise = get_signal(d["noise"], SignalConfig{0.0, 50, -100.0, 100.0, std::nullopt},
                                  "data.noise");
    }
    if (cfg.data.samples < 1 || !(cfg.data.dt > 0.0) || cfg.data.substeps < 1) {
      throw ConfigError("data: need M >= 1, dt > 0, substeps >= 1");
    }
  }

  if (doc.contains("fig1")) {
    const json& f = doc["fig1"];
    check_keys(f, {"xi", "K1_near", "K1_far", "near_scale", "noise"}, "fig1");
    if (f.contains("xi")) {
      const VectorXd xi = get_vector(f["xi"], "fig1.xi");
      if (xi.size() != 2 || !(xi(0) >= 0.0) || !(xi(0) < xi(1))) {
        throw ConfigError("fig1.xi: expected two increasing nonnegative scales");
      }
      cfg.fig1.xi = {xi(0), xi(1)};
    }
    if (f.contains("K1_near")) {
      cfg.fig1.k1_near = get_gain(f["K1_near"], "fig1.K1_near");
      if (cfg.fig1.k1_near) expect_shape(*cfg.fig1.k1_near, m, n, "fig1.K1_near");
    }
    if (f.contains("K1_far")) {
      cfg.fig1.k1_far = get_gain(f["K1_far"], "fig1.K1_far");
      if (cfg.fig1.k1_far) expect_shape(*cfg.fig1.k1_far, m, n, "fig1.K1_far");
    }
    if (f.contains("near_scale")) cfg.fig1.near_scale = get_number(f["near_scale"], "fig1.near_scale");
    if (f.contains("noise")) cfg.fig1.noise = get_signal(f["noise"], cfg.fig1.noise, "fig1.noise");
  }

  if (doc.contains("seed")) cfg.seed = get_seed(doc["seed"], "seed");
  if (doc.contains("output")) {
    if (!doc["output"].is_string()) throw ConfigError("output: expected a string");
    cfg.output = doc["output"].get<std::string>();
  }

  // Model assumptions are enforced at load time.
  try {
    LtiSystem sys(cfg.a, cfg.b);
    LqrCost cost{SymMatrix(cfg.q), SymMatrix(cfg.r)};
    check_problem(sys, cost);
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid problem: ") + e.what());
  }
  cfg.canonical = doc.dump();
  return cfg;
}

ExperimentConfig load_config(const std::string& path, Mode mode) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), mode);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace lqr_rpi::cli
