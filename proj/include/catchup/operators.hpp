#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "catchup/core.hpp"
#include "catchup/geometry.hpp"

namespace catchup {

/// Per-coordinate interval [lower, upper]; a singleton when lower == upper.
struct IntervalSet {
  Vector lower;
  Vector upper;

  static IntervalSet singleton(const Vector &v) { return {v, v}; }

  Index dim() const { return lower.size(); }
  bool is_singleton() const { return lower == upper; }
  Vector mid() const { return 0.5 * (lower + upper); }
  Vector clamp(const Vector &v) const { return v.cwiseMax(lower).cwiseMin(upper); }

  bool contains(const Vector &v, double tol) const {
    return ((v - lower).array() >= -tol).all() && ((upper - v).array() >= -tol).all();
  }

  /// Largest Euclidean norm over the box.
  double max_norm() const { return lower.cwiseAbs().cwiseMax(upper.cwiseAbs()).norm(); }
};

// ---------------------------------------------------------------------------
// Regular part G and perturbation f
// ---------------------------------------------------------------------------

using FieldFn = std::function<Vector(const Vector &)>;
using SetFn = std::function<IntervalSet(const Vector &)>;

/// The monotone, locally bounded part G of the operator, described by intervals.
class RegularPart {
public:
  struct Zero {};
  struct Linear {
    Matrix m;
  };
  struct SeparableL1 {
    Vector weights;
  };
  struct Custom {
    SetFn eval;
    std::string name;
  };
  using Variant = std::variant<Zero, Linear, SeparableL1, Custom>;

  static RegularPart zero() { return RegularPart(Zero{}); }

  /// G(x) = {M x} with M symmetric positive semidefinite.
  static RegularPart linear(Matrix m) {
    require(m.rows() == m.cols() && m.rows() > 0, "linear regular part: matrix must be square");
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()),
            "linear regular part: matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-12 * (1.0 + m.norm()),
            "linear regular part: matrix must be positive semidefinite");
    return RegularPart(Linear{std::move(m)});
  }

  /// G = subdifferential of sum_i w_i |x_i|.
  static RegularPart separable_l1(Vector weights) {
    require(weights.size() > 0, "l1 regular part: empty weights");
    require((weights.array() > 0.0).all(), "l1 regular part: weights must be positive");
    return RegularPart(SeparableL1{std::move(weights)});
  }

  static RegularPart custom(SetFn eval, std::string name = "custom") {
    require(static_cast<bool>(eval), "custom regular part: empty evaluator");
    return RegularPart(Custom{std::move(eval), std::move(name)});
  }

  const Variant &shape() const { return shape_; }

  std::string kind() const {
    static constexpr const char *names[] = {"zero", "linear", "l1", "custom"};
    return names[shape_.index()];
  }

  IntervalSet evaluate(const Vector &x) const {
    return std::visit(
        [&](const auto &s) -> IntervalSet {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Zero>) {
            return IntervalSet::singleton(Vector::Zero(x.size()));
          } else if constexpr (std::is_same_v<T, Linear>) {
            require_dim(x.size(), s.m.cols(), "G(x)");
            return IntervalSet::singleton(s.m * x);
          } else if constexpr (std::is_same_v<T, SeparableL1>) {
            require_dim(x.size(), s.weights.size(), "G(x)");
            IntervalSet out{Vector(x.size()), Vector(x.size())};
            for (Index i = 0; i < x.size(); ++i) {
              if (x[i] > 0.0) {
                out.lower[i] = out.upper[i] = s.weights[i];
              } else if (x[i] < 0.0) {
                out.lower[i] = out.upper[i] = -s.weights[i];
              } else {
                out.lower[i] = -s.weights[i];
                out.upper[i] = s.weights[i];
              }
            }
            return out;
          } else {
            IntervalSet out = s.eval(x);
            require_dim(out.dim(), x.size(), "custom G(x)");
            return out;
          }
        },
        shape_);
  }

private:
  explicit RegularPart(Variant v) : shape_(std::move(v)) {}
  Variant shape_;
};

inline IntervalSet evaluate_G(const RegularPart &g, const Vector &x) { return g.evaluate(x); }

/// Single-valued continuous perturbation f.
class VectorField {
public:
  struct Affine {
    Matrix a;
    Vector b;
  };
  struct Custom {
    FieldFn eval;
    std::string name;
  };
  using Variant = std::variant<Affine, Custom>;

  /// f(x) = A x + b.
  static VectorField affine(Matrix a, Vector b) {
    require(a.rows() == a.cols(), "affine field: matrix must be square");
    require_dim(b.size(), a.rows(), "affine field offset");
    return VectorField(Affine{std::move(a), std::move(b)});
  }

  static VectorField custom(FieldFn eval, std::string name = "custom") {
    require(static_cast<bool>(eval), "custom field: empty evaluator");
    return VectorField(Custom{std::move(eval), std::move(name)});
  }

  const Variant &shape() const { return shape_; }

  Vector operator()(const Vector &x) const {
    if (const auto *s = std::get_if<Affine>(&shape_)) {
      require_dim(x.size(), s->a.cols(), "f(x)");
      return s->a * x + s->b;
    }
    return std::get<Custom>(shape_).eval(x);
  }

private:
  explicit VectorField(Variant v) : shape_(std::move(v)) {}
  Variant shape_;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct GrowthConstants {
  double a = 0.0;
  double b = 0.0;
};

struct DissipativityConstants {
  double r_star = 1.0;
  double m = 0.0;
  double gamma = 1.0;
};

/// M~ = max{M, R*(a + b R*) + gamma R*^2}.
inline double globalize_constants(double a, double b, double r_star, double m, double gamma) {
  require(a >= 0.0 && b >= 0.0 && r_star >= 0.0 && m >= 0.0, "globalize_constants: negative input");
  require(gamma > 0.0, "globalize_constants: gamma must be positive");
  return std::max(m, r_star * (a + b * r_star) + gamma * r_star * r_star);
}

/// x' in f(x) - G(x) - N_C(x), with the hypotheses' constants.
struct MonotoneModel {
  VectorField f;
  RegularPart g;
  ConvexSet c;
  GrowthConstants growth;
  DissipativityConstants dissipativity;
  std::optional<double> one_sided_lipschitz;
  std::string name;
  std::string lipschitz_note;

  Index dim() const { return c.dim(); }

  /// F(x) = f(x) - G(x) as intervals.
  IntervalSet F(const Vector &x) const {
    require_dim(x.size(), dim(), "F(x)");
    const Vector fx = f(x);
    const IntervalSet gx = g.evaluate(x);
    return {fx - gx.upper, fx - gx.lower};
  }

  double m_tilde() const {
    return globalize_constants(growth.a, growth.b, dissipativity.r_star, dissipativity.m,
                               dissipativity.gamma);
  }

  void validate() const {
    require(growth.a >= 0.0 && growth.b >= 0.0, "model: growth constants must be nonnegative");
    require(dissipativity.gamma > 0.0, "model: gamma must be positive");
    require(dissipativity.r_star > 0.0, "model: R* must be positive");
    require(dissipativity.m >= 0.0, "model: M must be nonnegative");
    require_dim(f(Vector::Zero(dim())).size(), dim(), "model field");
    require_dim(g.evaluate(Vector::Zero(dim())).dim(), dim(), "model regular part");
  }
};

// ---------------------------------------------------------------------------
// Selections
// ---------------------------------------------------------------------------

enum class SelectionKind { MinimalNorm, Sign, Randomized };

class SelectionPolicy {
public:
  static SelectionPolicy minimal_norm() { return SelectionPolicy(SelectionKind::MinimalNorm, 0, 0); }
  /// On components where G(x) is a proper interval choose its lower end (-1),
  /// midpoint (0) or upper end (+1).
  static SelectionPolicy sign(int s) {
    require(s == -1 || s == 0 || s == 1, "sign selection: sign must be -1, 0 or 1");
    return SelectionPolicy(SelectionKind::Sign, s, 0);
  }
  static SelectionPolicy randomized(std::uint64_t seed) {
    return SelectionPolicy(SelectionKind::Randomized, 0, seed);
  }

  SelectionKind kind() const { return kind_; }
  int sign_value() const { return sign_; }
  std::uint64_t seed() const { return seed_; }
  Rng &rng() { return rng_; }

  std::string name() const {
    switch (kind_) {
    case SelectionKind::MinimalNorm:
      return "minimal_norm";
    case SelectionKind::Sign:
      return "sign";
    case SelectionKind::Randomized:
      return "randomized";
    }
    return "unknown";
  }

private:
  SelectionPolicy(SelectionKind k, int s, std::uint64_t seed) : kind_(k), sign_(s), seed_(seed), rng_(seed) {}
  SelectionKind kind_;
  int sign_;
  std::uint64_t seed_;
  Rng rng_;
};

/// w = f(x) - g with g in G(x) chosen by the policy.
inline Vector select_F(const MonotoneModel &model, const Vector &x, SelectionPolicy &policy) {
  require_dim(x.size(), model.dim(), "select_F");
  const Vector fx = model.f(x);
  const IntervalSet gx = model.g.evaluate(x);
  Vector g(x.size());
  switch (policy.kind()) {
  case SelectionKind::MinimalNorm:
    g = gx.clamp(fx);
    break;
  case SelectionKind::Sign:
    for (Index i = 0; i < g.size(); ++i) {
      if (gx.lower[i] == gx.upper[i] || policy.sign_value() < 0)
        g[i] = gx.lower[i];
      else if (policy.sign_value() > 0)
        g[i] = gx.upper[i];
      else
        g[i] = 0.5 * (gx.lower[i] + gx.upper[i]);
    }
    break;
  case SelectionKind::Randomized:
    for (Index i = 0; i < g.size(); ++i)
      g[i] = gx.lower[i] == gx.upper[i] ? gx.lower[i] : policy.rng().uniform(gx.lower[i], gx.upper[i]);
    break;
  }
  return fx - g;
}

// ---------------------------------------------------------------------------
// Sampling certificates for the hypotheses
// ---------------------------------------------------------------------------

struct SampleSpec {
  int count = 1000;
  double radius = 10.0;
  double min_norm = 0.0;
  std::uint64_t seed = 0;
  /// Extra points checked in addition to the random draws.
  std::vector<Vector> points;
};

struct HypothesisCertificate {
  bool holds = false;
  double margin = kInf; ///< worst (smallest) slack over the sample
  Vector worst_x;
  int samples = 0;
  std::uint64_t seed = 0;
  double radius = 0.0;
};

/// Random points of C with min_norm <= ||x|| <= radius, plus the explicit points.
inline std::vector<Vector> sample_constraint_points(const ConvexSet &c, const SampleSpec &spec) {
  require(spec.radius > 0.0 && spec.min_norm <= spec.radius, "sample spec: invalid radius range");
  std::vector<Vector> out;
  for (const auto &p : spec.points) {
    require_dim(p.size(), c.dim(), "sample point");
    out.push_back(p);
  }
  Rng rng(spec.seed);
  const Vector center = project(c, Vector::Zero(c.dim()));
  const long max_attempts = 200L * std::max(1, spec.count);
  int drawn = 0;
  for (long attempt = 0; attempt < max_attempts && drawn < spec.count; ++attempt) {
    Vector x = sample_point(c, rng, center, spec.radius);
    const double n = x.norm();
    if (n < spec.min_norm) {
      // Push radially outward; stays in C for cones and is rechecked otherwise.
      if (n == 0.0)
        continue;
      x *= rng.uniform(spec.min_norm, spec.radius) / n;
      if (!contains(c, x))
        continue;
    }
    if (x.norm() > spec.radius * (1.0 + 1e-12))
      continue;
    out.push_back(std::move(x));
    ++drawn;
  }
  if (out.empty())
    throw PreconditionError("sample spec produced no points of C in the requested radius range");
  return out;
}

/// Checks sup_{u in F(x)} ||u|| <= a + b ||x|| on the sample.
inline HypothesisCertificate check_linear_growth(const MonotoneModel &model, const SampleSpec &spec) {
  const auto xs = sample_constraint_points(model.c, spec);
  HypothesisCertificate cert;
  cert.seed = spec.seed;
  cert.radius = spec.radius;
  double worst_tol = 0.0;
  for (const auto &x : xs) {
    const double bound = model.growth.a + model.growth.b * x.norm();
    const double margin = bound - model.F(x).max_norm();
    if (margin < cert.margin) {
      cert.margin = margin;
      cert.worst_x = x;
      worst_tol = roundoff_slack(bound) * 1e2;
    }
    ++cert.samples;
  }
  cert.holds = cert.margin >= -worst_tol;
  return cert;
}

/// sup over v in proj_{T_C(x)} F(x) of <x, v>, using the extreme points of F(x).
inline double dissipativity_sup(const MonotoneModel &model, const Vector &x, Rng &rng) {
  const IntervalSet fx = model.F(x);
  if (auto bb = model.c.box_bounds()) {
    // T_C(x) is a product of intervals and the projection acts per coordinate.
    const double tol = membership_tolerance(x);
    double total = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      const bool at_lower = std::isfinite(bb->first[i]) && x[i] <= bb->first[i] + tol;
      const bool at_upper = std::isfinite(bb->second[i]) && x[i] >= bb->second[i] - tol;
      auto clampt = [&](double u) {
        if (at_lower)
          u = std::max(u, 0.0);
        if (at_upper)
          u = std::min(u, 0.0);
        return u;
      };
      total += std::max(x[i] * clampt(fx.lower[i]), x[i] * clampt(fx.upper[i]));
    }
    return total;
  }
  std::vector<Index> free_dims;
  for (Index i = 0; i < x.size(); ++i)
    if (fx.lower[i] != fx.upper[i])
      free_dims.push_back(i);
  constexpr std::size_t kMaxEnumerated = 14;
  const bool enumerate = free_dims.size() <= kMaxEnumerated;
  const std::uint64_t vertices = enumerate ? (std::uint64_t{1} << free_dims.size()) : (std::uint64_t{1} << kMaxEnumerated);
  double best = -kInf;
  for (std::uint64_t mask = 0; mask < vertices; ++mask) {
    Vector u = fx.lower;
    for (std::size_t j = 0; j < free_dims.size(); ++j) {
      const bool hi = enumerate ? ((mask >> j) & 1U) : (rng.uniform() < 0.5);
      if (hi)
        u[free_dims[j]] = fx.upper[free_dims[j]];
    }
    best = std::max(best, x.dot(tangent_project(model.c, x, u)));
  }
  return best;
}

/// Checks sup_{v in proj_T F(x)} <x, v> <= M - gamma ||x||^2 on sampled x with ||x|| >= R*.
inline HypothesisCertificate check_tangent_dissipativity(const MonotoneModel &model, SampleSpec spec) {
  spec.min_norm = std::max(spec.min_norm, model.dissipativity.r_star);
  if (spec.radius < spec.min_norm)
    spec.radius = spec.min_norm;
  std::vector<Vector> extra;
  for (const auto &p : spec.points)
    if (p.norm() >= model.dissipativity.r_star)
      extra.push_back(p);
  spec.points = std::move(extra);
  HypothesisCertificate cert;
  cert.seed = spec.seed;
  cert.radius = spec.radius;
  std::vector<Vector> xs;
  try {
    xs = sample_constraint_points(model.c, spec);
  } catch (const PreconditionError &) {
    // No point of C with ||x|| >= R* was found (for a box with R* = R_C only
    // the corners qualify), so there is nothing to check.
    cert.holds = true;
    return cert;
  }
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  double worst_tol = 0.0;
  for (const auto &x : xs) {
    const double bound = model.dissipativity.m - model.dissipativity.gamma * x.squaredNorm();
    const double margin = bound - dissipativity_sup(model, x, rng);
    if (margin < cert.margin) {
      cert.margin = margin;
      cert.worst_x = x;
      worst_tol = 1e-10 * (1.0 + model.dissipativity.m + model.dissipativity.gamma * x.squaredNorm());
    }
    ++cert.samples;
  }
  cert.holds = cert.margin >= -worst_tol;
  return cert;
}

/// sup over w in F(x), wb in F(xb) of <x - xb, w - wb>.
inline double one_sided_pair_sup(const IntervalSet &fx, const IntervalSet &fxb, const Vector &dx) {
  double s = 0.0;
  for (Index i = 0; i < dx.size(); ++i)
    s += dx[i] >= 0.0 ? dx[i] * (fx.upper[i] - fxb.lower[i]) : dx[i] * (fx.lower[i] - fxb.upper[i]);
  return s;
}

/// Sampled estimate of the smallest l with <x - xb, w - wb> <= l ||x - xb||^2.
inline double estimate_one_sided_lipschitz(const MonotoneModel &model, const SampleSpec &spec) {
  const auto xs = sample_constraint_points(model.c, spec);
  require(xs.size() >= 2, "one-sided Lipschitz estimate needs at least two sample points");
  double best = -kInf;
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    const Vector dx = xs[i] - xs[i + 1];
    const double d2 = dx.squaredNorm();
    if (d2 == 0.0)
      continue;
    best = std::max(best, one_sided_pair_sup(model.F(xs[i]), model.F(xs[i + 1]), dx) / d2);
  }
  return best;
}

/// Monotonicity of G on sampled pairs: margin = min of inf <g1 - g2, x1 - x2> over extreme selections.
inline HypothesisCertificate check_monotone_G(const RegularPart &g, const ConvexSet &c, const SampleSpec &spec) {
  const auto xs = sample_constraint_points(c, spec);
  HypothesisCertificate cert;
  cert.seed = spec.seed;
  cert.radius = spec.radius;
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    const Vector dx = xs[i] - xs[i + 1];
    const IntervalSet g1 = g.evaluate(xs[i]);
    const IntervalSet g2 = g.evaluate(xs[i + 1]);
    double inf = 0.0;
    for (Index j = 0; j < dx.size(); ++j)
      inf += dx[j] >= 0.0 ? dx[j] * (g1.lower[j] - g2.upper[j]) : dx[j] * (g1.upper[j] - g2.lower[j]);
    if (inf < cert.margin) {
      cert.margin = inf;
      cert.worst_x = xs[i];
    }
    ++cert.samples;
  }
  cert.holds = cert.samples > 0 && cert.margin >= -1e-10;
  return cert;
}

} // namespace catchup
