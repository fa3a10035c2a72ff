#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace catchup {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A projection or cone computation could not produce a certified answer.
class GeometryError : public Error {
public:
  using Error::Error;
};

/// A caller contract was violated (out-of-range parameter, point outside the set, ...).
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

inline void require(bool condition, const std::string &message) {
  if (!condition)
    throw PreconditionError(message);
}

inline void require_dim(Index got, Index expected, const char *what) {
  if (got != expected)
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) +
                         " does not match " + std::to_string(expected));
}

// ---------------------------------------------------------------------------
// Tolerances
// ---------------------------------------------------------------------------

/// x is considered a member of C when distance(C, x) <= membership_tolerance(x).
inline double membership_tolerance(const Vector &x) { return 1e-9 * (1.0 + x.norm()); }

/// Slack used when a quantity is compared against a bound that it satisfies
/// in exact arithmetic (summations, squared norms).
inline double roundoff_slack(double scale) { return 1e-12 * (1.0 + std::abs(scale)); }

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// Seeded generator with platform-independent output.
///
/// std::mt19937_64 has a fully specified output sequence; the distributions in
/// <random> do not, so the conversions to doubles are done here by hand.
class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
      u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i)
      v[i] = normal();
    return v;
  }

  /// Uniformly distributed unit vector.
  Vector direction(Index n) {
    Vector v = normal_vector(n);
    double nv = v.norm();
    while (nv == 0.0) {
      v = normal_vector(n);
      nv = v.norm();
    }
    return v / nv;
  }

  Vector uniform_vector(const Vector &lo, const Vector &hi) {
    Vector v(lo.size());
    for (Index i = 0; i < lo.size(); ++i)
      v[i] = uniform(lo[i], hi[i]);
    return v;
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace catchup
