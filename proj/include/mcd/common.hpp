#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat8 = Eigen::Matrix<double, 8, 8>;

enum class Side { plus = 0, minus = 1 };

inline int side_index(Side s) { return s == Side::plus ? 0 : 1; }
inline double side_sign(Side s) { return s == Side::plus ? 1.0 : -1.0; }

// Error taxonomy shared by all modules.
enum class Err {
  NonPositivePressure,
  HyperbolicityViolated,
  DegenerateJacobian,
  LiftInadmissible,
  IllConditionedSpectrum,
  SingularTransform,
  EpsilonOutOfRange,
  InertiaChanged,
  SolveDiverged,
  CFLViolated,
  NotCauchy,
  NoDecayingBasis,
  ArchiveIncomplete,
  AdmissibilityLost,
  LinearSolveFailed,
  StencilTooCoarse,
  OrderTooHigh,
  ConfigInvalid,
};

struct Error : std::runtime_error {
  Err code;
  Error(Err c, const std::string& what) : std::runtime_error(what), code(c) {}
};

[[noreturn]] inline void fail(Err c, const std::string& what) { throw Error(c, what); }

inline void require(bool ok, Err c, const std::string& what) {
  if (!ok) fail(c, what);
}

template <typename T> T sqr(T x) { return x * x; }

// Deterministic RNG used by every randomized sweep.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double a, double b) {
    std::uniform_real_distribution<double> d(a, b);
    return d(gen);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(gen);
  }
  int integer(int a, int b) {
    std::uniform_int_distribution<int> d(a, b);
    return d(gen);
  }
};

// Least-squares slope of log(y) vs log(x); used by convergence-order checks.
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mcd
