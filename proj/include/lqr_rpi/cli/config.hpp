#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lqr_rpi/errors.hpp"
#include "lqr_rpi/matops.hpp"
#include "lqr_rpi/policy_iteration.hpp"

namespace lqr_rpi::cli {

/// Bad or inconsistent experiment configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Mode { kAre, kPiExact, kPiRobust, kPiData, kFig1 };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

struct SignalConfig {
  double amplitude = 0.0;
  int count = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<std::uint64_t> seed;
};

struct DataConfig {
  int samples = 140;
  double dt = 0.1;
  int substeps = 20;
  std::optional<VectorXd> x0;  // defaults to ones
  SignalConfig input{0.2, 100, -500.0, 500.0, std::nullopt};
  std::optional<SignalConfig> noise;
};

struct Fig1Config {
  std::vector<double> xi{0.01, 0.5};
  std::optional<MatrixXd> k1_near;
  std::optional<MatrixXd> k1_far;
  double near_scale = 0.05;
  SignalConfig noise{1.0, 50, -100.0, 100.0, std::nullopt};
};

struct ExperimentConfig {
  Mode mode = Mode::kAre;
  MatrixXd a, b, q, r;
  std::optional<MatrixXd> k1;  // nullopt means "auto"
  double tol = 1e-12;
  double residual_tol = 1e-10;
  int max_iter = 100;
  int n_iter = 10;
  DisturbanceSpec disturbance;
  bool disturbance_seed_given = false;
  DataConfig data;
  Fig1Config fig1;
  std::uint64_t seed = 0;
  std::string output;
  // Canonical serialization of the parsed document, used for hashing.
  std::string canonical;
};

/// Parses a JSON document strictly: unknown keys and wrong types raise
/// ConfigError, matrices are checked against n and m. For fig1 the plant
/// and cost default to A = [[-21,-20],[9,8]], B = Q = R = I.
ExperimentConfig parse_config(const std::string& text, Mode mode);
ExperimentConfig load_config(const std::string& path, Mode mode);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Independent seed for a named stream derived from the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace lqr_rpi::cli
