#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace lqr_rpi {

/// Reproducible random stream keyed by a list of integers, e.g. (seed, i).
/// The engine and the seeding algorithm are fully specified by the standard,
/// and the real-valued conversions below are done by hand, so a given key
/// yields the same numbers on every conforming platform.
class KeyedRng {
 public:
  KeyedRng(std::initializer_list<std::uint64_t> key);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via the Marsaglia polar method.
  double normal();

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lqr_rpi
