#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "catchup/core.hpp"

namespace catchup {

class ConvexSet;

/// Axis-aligned box [lower, upper]; infinite bounds are allowed.
struct Box {
  Vector lower;
  Vector upper;
};

/// Closed Euclidean ball.
struct Ball {
  Vector center;
  double radius = 0.0;
};

/// Halfspace { z : <normal, z> <= offset } with a unit normal.
struct Halfspace {
  Vector normal;
  double offset = 0.0;
};

struct NonnegOrthant {
  Index dim = 0;
};

/// The one-dimensional set [0, +inf).
struct Halfline {};

/// Intersection of simple sets. Projection onto it is iterative and only
/// certified up to `declared_eps` in squared distance.
struct Intersection {
  std::vector<ConvexSet> members;
  int budget = 20000;
  double declared_eps = 1e-10;
};

/// Closed convex constraint region. Immutable after construction.
class ConvexSet {
public:
  using Variant = std::variant<Box, Ball, Halfspace, NonnegOrthant, Halfline, Intersection>;

  static ConvexSet box(Vector lower, Vector upper) {
    require_dim(upper.size(), lower.size(), "box upper bound");
    require(lower.size() > 0, "box: empty dimension");
    for (Index i = 0; i < lower.size(); ++i) {
      require(!std::isnan(lower[i]) && !std::isnan(upper[i]), "box: NaN bound");
      require(lower[i] <= upper[i], "box: lower bound exceeds upper bound at index " + std::to_string(i));
    }
    return ConvexSet(Box{std::move(lower), std::move(upper)});
  }

  static ConvexSet ball(Vector center, double radius) {
    require(center.size() > 0, "ball: empty dimension");
    require(radius >= 0.0 && std::isfinite(radius), "ball: radius must be finite and nonnegative");
    return ConvexSet(Ball{std::move(center), radius});
  }

  /// { z : <normal, z> <= offset }; the normal is rescaled to unit length.
  static ConvexSet halfspace(Vector normal, double offset) {
    const double n = normal.norm();
    require(n > 0.0 && std::isfinite(n), "halfspace: normal must be nonzero");
    require(std::isfinite(offset), "halfspace: offset must be finite");
    return ConvexSet(Halfspace{normal / n, offset / n});
  }

  static ConvexSet nonneg_orthant(Index dim) {
    require(dim > 0, "nonneg orthant: dimension must be positive");
    return ConvexSet(NonnegOrthant{dim});
  }

  static ConvexSet halfline() { return ConvexSet(Halfline{}); }

  /// Nested intersections are flattened; the intersection itself is assumed nonempty.
  static ConvexSet intersection(std::vector<ConvexSet> members, int budget = 20000,
                                double declared_eps = 1e-10) {
    require(!members.empty(), "intersection: member list is empty");
    require(budget > 0, "intersection: iteration budget must be positive");
    require(declared_eps > 0.0, "intersection: declared tolerance must be positive");
    std::vector<ConvexSet> flat;
    for (auto &m : members) {
      if (const auto *inner = std::get_if<Intersection>(&m.shape_))
        flat.insert(flat.end(), inner->members.begin(), inner->members.end());
      else
        flat.push_back(std::move(m));
    }
    for (const auto &m : flat)
      require_dim(m.dim(), flat.front().dim(), "intersection member");
    if (flat.size() == 1)
      return flat.front();
    return ConvexSet(Intersection{std::move(flat), budget, declared_eps});
  }

  const Variant &shape() const { return shape_; }
  Index dim() const { return dim_; }
  bool is_intersection() const { return std::holds_alternative<Intersection>(shape_); }

  /// Lower/upper bounds when the set is a (possibly unbounded) box.
  std::optional<std::pair<Vector, Vector>> box_bounds() const {
    if (const auto *b = std::get_if<Box>(&shape_))
      return std::make_pair(b->lower, b->upper);
    if (std::holds_alternative<NonnegOrthant>(shape_) || std::holds_alternative<Halfline>(shape_))
      return std::make_pair(Vector(Vector::Zero(dim_)), Vector(Vector::Constant(dim_, kInf)));
    return std::nullopt;
  }

  bool bounded() const {
    return std::visit(
        [](const auto &s) -> bool {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Box>)
            return s.lower.allFinite() && s.upper.allFinite();
          else if constexpr (std::is_same_v<T, Ball>)
            return true;
          else if constexpr (std::is_same_v<T, Intersection>)
            return std::any_of(s.members.begin(), s.members.end(),
                               [](const ConvexSet &m) { return m.bounded(); });
          else
            return false;
        },
        shape_);
  }

  std::string kind() const {
    static constexpr const char *names[] = {"box", "ball", "halfspace", "nonneg_orthant", "halfline",
                                            "intersection"};
    return names[shape_.index()];
  }

private:
  explicit ConvexSet(Variant v) : shape_(std::move(v)) {
    dim_ = std::visit(
        [](const auto &s) -> Index {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Box>)
            return s.lower.size();
          else if constexpr (std::is_same_v<T, Ball>)
            return s.center.size();
          else if constexpr (std::is_same_v<T, Halfspace>)
            return s.normal.size();
          else if constexpr (std::is_same_v<T, NonnegOrthant>)
            return s.dim;
          else if constexpr (std::is_same_v<T, Halfline>)
            return 1;
          else
            return s.members.front().dim();
        },
        shape_);
  }

  Variant shape_;
  Index dim_ = 0;
};

/// Orthogonal split of a vector into its tangent-cone and normal-cone parts.
struct ConePair {
  Vector tangential;
  Vector normal;
};

namespace detail {

inline Vector project_box(const Vector &lower, const Vector &upper, const Vector &y) {
  return y.cwiseMax(lower).cwiseMin(upper);
}

/// Exact projection onto a set that is not an intersection.
inline Vector project_simple(const ConvexSet &c, const Vector &y) {
  return std::visit(
      [&](const auto &s) -> Vector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          return project_box(s.lower, s.upper, y);
        } else if constexpr (std::is_same_v<T, Ball>) {
          const Vector d = y - s.center;
          const double n = d.norm();
          if (n <= s.radius)
            return y;
          return s.center + (s.radius / n) * d;
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          const double excess = s.normal.dot(y) - s.offset;
          if (excess <= 0.0)
            return y;
          return y - excess * s.normal;
        } else if constexpr (std::is_same_v<T, NonnegOrthant> || std::is_same_v<T, Halfline>) {
          return y.cwiseMax(0.0);
        } else {
          throw GeometryError("project_simple called on an intersection");
        }
      },
      c.shape());
}

/// Exact distance to a set that is not an intersection.
inline double distance_simple(const ConvexSet &c, const Vector &y) {
  if (const auto *h = std::get_if<Halfspace>(&c.shape()))
    return std::max(0.0, h->normal.dot(y) - h->offset);
  if (const auto *b = std::get_if<Ball>(&c.shape()))
    return std::max(0.0, (y - b->center).norm() - b->radius);
  return (project_simple(c, y) - y).norm();
}

struct DykstraResult {
  Vector point;
  double upper_sq = kInf; ///< ||point - y||^2
  double lower_sq = 0.0;  ///< certified lower bound on d_C(y)^2
  int cycles = 0;
  bool feasible = false;
  bool certified = false;
};

/// Dykstra's alternating projections with a duality-gap stopping rule.
///
/// The increments I_i returned by Dykstra lie in N_{C_i}(p_i), so
///   2<sum I, y> - ||sum I||^2 - 2 sum <I_i, p_i>
/// is a Fenchel-dual value and a valid lower bound on d_C(y)^2.
inline DykstraResult dykstra(const Intersection &s, const Vector &y, double eps_target) {
  const std::size_t m = s.members.size();
  std::vector<Vector> increments(m, Vector::Zero(y.size()));
  std::vector<Vector> points(m, y);
  double lower_simple = 0.0;
  for (const auto &member : s.members) {
    const double d = distance_simple(member, y);
    lower_simple = std::max(lower_simple, d * d);
  }

  DykstraResult best;
  Vector x = y;
  for (int cycle = 1; cycle <= s.budget; ++cycle) {
    for (std::size_t i = 0; i < m; ++i) {
      const Vector u = x + increments[i];
      points[i] = project_simple(s.members[i], u);
      increments[i] = u - points[i];
      x = points[i];
    }

    const double tol = membership_tolerance(x);
    bool feasible = true;
    for (const auto &member : s.members)
      feasible = feasible && distance_simple(member, x) <= tol;
    if (!feasible)
      continue;

    Vector sum = Vector::Zero(y.size());
    double support = 0.0;
    double support_abs = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum += increments[i];
      const double term = increments[i].dot(points[i]);
      support += term;
      support_abs += std::abs(term);
    }
    const double dual = 2.0 * sum.dot(y) - sum.squaredNorm() - 2.0 * support;
    const double lower = std::max(lower_simple, dual);
    const double upper = (x - y).squaredNorm();
    const double slack =
        4e-16 * static_cast<double>(m + 2) * (1.0 + y.squaredNorm() + sum.squaredNorm() + support_abs);

    if (!best.feasible || upper - lower < best.upper_sq - best.lower_sq) {
      best.point = x;
      best.upper_sq = upper;
      best.lower_sq = std::max(0.0, lower);
      best.feasible = true;
    }
    best.cycles = cycle;
    if (upper <= lower + eps_target + slack) {
      best.point = x;
      best.upper_sq = upper;
      best.lower_sq = std::max(0.0, std::min(lower, upper));
      best.certified = true;
      return best;
    }
  }
  if (!best.feasible) {
    best.point = x;
    best.upper_sq = (x - y).squaredNorm();
    best.lower_sq = lower_simple;
  }
  best.cycles = s.budget;
  return best;
}

/// Lawson-Hanson nonnegative least squares: min ||A lambda - b|| s.t. lambda >= 0.
/// Returns std::nullopt if the iteration cap is hit.
inline std::optional<Vector> nnls(const Matrix &a, const Vector &b) {
  const Index n = a.cols();
  Vector lambda = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-13 * (1.0 + a.norm() * b.norm());
  const int max_outer = static_cast<int>(3 * n + 10);

  auto solve_passive = [&](Vector &z) {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)])
        idx.push_back(j);
    Matrix sub(a.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
      sub.col(static_cast<Index>(k)) = a.col(idx[k]);
    const Vector sol = sub.completeOrthogonalDecomposition().solve(b);
    z = Vector::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k)
      z[idx[k]] = sol[static_cast<Index>(k)];
  };

  for (int outer = 0; outer < max_outer; ++outer) {
    const Vector grad = a.transpose() * (b - a * lambda);
    Index best = -1;
    double best_val = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && grad[j] > best_val) {
        best_val = grad[j];
        best = j;
      }
    }
    if (best < 0)
      return lambda;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner <= n + 1; ++inner) {
      Vector z;
      solve_passive(z);
      bool all_positive = true;
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0)
          all_positive = false;
      if (all_positive) {
        lambda = z;
        break;
      }
      double alpha = 1.0;
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0)
          alpha = std::min(alpha, lambda[j] / (lambda[j] - z[j]));
      lambda += alpha * (z - lambda);
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && lambda[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          lambda[j] = 0.0;
        }
      }
    }
  }
  return std::nullopt;
}

/// Projected gradient on the generator weights; fallback when NNLS stalls.
inline Vector cone_weights_projected_gradient(const Matrix &a, const Vector &b, int budget) {
  Vector lambda = Vector::Zero(a.cols());
  const double lip = std::max(1e-300, a.squaredNorm());
  for (int it = 0; it < budget; ++it)
    lambda = (lambda + (a.transpose() * (b - a * lambda)) / lip).cwiseMax(0.0);
  return lambda;
}

inline bool is_signed_axis(const Vector &g, Index &axis, double &sign) {
  Index nonzero = 0;
  for (Index i = 0; i < g.size(); ++i) {
    if (g[i] != 0.0) {
      ++nonzero;
      axis = i;
      sign = g[i] > 0.0 ? 1.0 : -1.0;
    }
  }
  return nonzero == 1 && std::abs(g[axis]) == 1.0;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Membership, distance, projection
// ---------------------------------------------------------------------------

inline bool contains(const ConvexSet &c, const Vector &x) {
  require_dim(x.size(), c.dim(), "contains");
  const double tol = membership_tolerance(x);
  if (const auto *s = std::get_if<Intersection>(&c.shape())) {
    return std::all_of(s->members.begin(), s->members.end(),
                       [&](const ConvexSet &m) { return detail::distance_simple(m, x) <= tol; });
  }
  return detail::distance_simple(c, x) <= tol;
}

/// Metric projection. For an intersection the result is certified to satisfy
/// ||z - y||^2 <= d_C(y)^2 + declared_eps.
inline Vector project(const ConvexSet &c, const Vector &y) {
  require_dim(y.size(), c.dim(), "project");
  if (const auto *s = std::get_if<Intersection>(&c.shape())) {
    auto r = detail::dykstra(*s, y, s->declared_eps);
    if (!r.certified)
      throw GeometryError("intersection projection not certified within " + std::to_string(s->budget) +
                          " cycles (gap " + std::to_string(r.upper_sq - r.lower_sq) + ")");
    return r.point;
  }
  return detail::project_simple(c, y);
}

/// Euclidean distance; exact for simple sets, that of the certified projection for intersections.
inline double distance(const ConvexSet &c, const Vector &y) {
  require_dim(y.size(), c.dim(), "distance");
  if (c.is_intersection())
    return (project(c, y) - y).norm();
  return detail::distance_simple(c, y);
}

// ---------------------------------------------------------------------------
// Sampling helpers
// ---------------------------------------------------------------------------

/// A random point of C, drawn near `center` within the box window of half-width `window`.
/// Exact membership for simple sets; for intersections, up to the projection tolerance.
inline Vector sample_point(const ConvexSet &c, Rng &rng, const Vector &center, double window) {
  if (auto bb = c.box_bounds()) {
    Vector lo = bb->first.cwiseMax((center.array() - window).matrix());
    Vector hi = bb->second.cwiseMin((center.array() + window).matrix());
    hi = hi.cwiseMax(lo);
    return rng.uniform_vector(lo, hi);
  }
  if (const auto *b = std::get_if<Ball>(&c.shape())) {
    const double r = b->radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(c.dim()));
    return b->center + r * rng.direction(c.dim());
  }
  const Vector lo = (center.array() - window).matrix();
  const Vector hi = (center.array() + window).matrix();
  return project(c, rng.uniform_vector(lo, hi));
}

// ---------------------------------------------------------------------------
// Approximate projection
// ---------------------------------------------------------------------------

enum class ApproxKind { Exact, Perturbed, Iterative };

/// How proj_C^eps is realized. Perturbed carries its own generator state.
class ApproxPolicy {
public:
  static ApproxPolicy exact() { return ApproxPolicy(ApproxKind::Exact, 0); }
  static ApproxPolicy perturbed(std::uint64_t seed) { return ApproxPolicy(ApproxKind::Perturbed, seed); }
  static ApproxPolicy iterative() { return ApproxPolicy(ApproxKind::Iterative, 0); }

  ApproxKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  Rng &rng() { return rng_; }

  std::string name() const {
    switch (kind_) {
    case ApproxKind::Exact:
      return "exact";
    case ApproxKind::Perturbed:
      return "perturbed";
    case ApproxKind::Iterative:
      return "iterative";
    }
    return "unknown";
  }

private:
  ApproxPolicy(ApproxKind k, std::uint64_t seed) : kind_(k), seed_(seed), rng_(seed) {}
  ApproxKind kind_;
  std::uint64_t seed_;
  Rng rng_;
};

/// Approximate projection together with the tolerance it is certified for.
struct ApproxResult {
  Vector point;
  /// ||point - y||^2 <= d_C(y)^2 + eps_bound holds.
  double eps_bound = 0.0;
};

inline ApproxResult approx_project_certified(const ConvexSet &c, const Vector &y, double eps,
                                             ApproxPolicy &policy) {
  require_dim(y.size(), c.dim(), "approx_project");
  require(eps >= 0.0 && std::isfinite(eps), "approx_project: eps must be finite and nonnegative");

  Vector base;
  double dist_sq_lower = 0.0;
  double base_gap = 0.0;
  double eps_bound = eps;
  if (const auto *s = std::get_if<Intersection>(&c.shape())) {
    const double target = policy.kind() == ApproxKind::Iterative ? std::max(eps, s->declared_eps)
                                                                 : s->declared_eps;
    auto r = detail::dykstra(*s, y, target);
    if (!r.certified)
      throw GeometryError("approximate projection onto intersection not certified within budget");
    base = r.point;
    dist_sq_lower = r.lower_sq;
    base_gap = std::max(0.0, r.upper_sq - r.lower_sq);
    eps_bound = std::max(eps, target);
  } else {
    base = detail::project_simple(c, y);
    dist_sq_lower = (base - y).squaredNorm();
  }

  if (policy.kind() != ApproxKind::Perturbed || eps <= base_gap)
    return {base, eps_bound};

  // Move from the base point toward a random feasible point q. By convexity the
  // segment stays in C; the step length s keeps ||z - y||^2 <= lower + eps:
  //   ||p - y||^2 + 2 s <q - p, p - y> + s^2 ||q - p||^2 <= lower + eps.
  Rng &rng = policy.rng();
  const double window = std::max(1.0, std::sqrt(eps) + std::sqrt(dist_sq_lower));
  const Vector q = sample_point(c, rng, base, window);
  const Vector dir = q - base;
  const double h = dir.squaredNorm();
  if (h == 0.0)
    return {base, eps_bound};
  const double g = dir.dot(base - y);
  const double budget = dist_sq_lower + eps - (base - y).squaredNorm();
  if (budget <= 0.0)
    return {base, eps_bound};
  double s_max = (-g + std::sqrt(g * g + h * budget)) / h;
  s_max = std::min(1.0, s_max);
  double s = s_max * rng.uniform(0.25, 1.0);
  Vector z = base + s * dir;
  for (int halvings = 0; halvings < 60 && (z - y).squaredNorm() > dist_sq_lower + eps; ++halvings) {
    s *= 0.5;
    z = base + s * dir;
  }
  if ((z - y).squaredNorm() > dist_sq_lower + eps)
    z = base;
  return {z, eps_bound};
}

/// A point z of C with ||z - y||^2 <= d_C(y)^2 + eps (up to the set's declared
/// tolerance for intersections).
inline Vector approx_project(const ConvexSet &c, const Vector &y, double eps, ApproxPolicy &policy) {
  return approx_project_certified(c, y, eps, policy).point;
}

// ---------------------------------------------------------------------------
// Tangent and normal cones
// ---------------------------------------------------------------------------

/// Generators of N_C(x): the cone is the nonnegative span of the returned vectors.
/// All shipped set variants have finitely generated normal cones.
inline std::vector<Vector> normal_cone_generators(const ConvexSet &c, const Vector &x) {
  std::vector<Vector> out;
  const double tol = membership_tolerance(x);
  const Index n = c.dim();
  auto axis = [n](Index i, double sign) {
    Vector e = Vector::Zero(n);
    e[i] = sign;
    return e;
  };
  std::visit(
      [&](const auto &s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Box>) {
          for (Index i = 0; i < n; ++i) {
            if (std::isfinite(s.lower[i]) && x[i] <= s.lower[i] + tol)
              out.push_back(axis(i, -1.0));
            if (std::isfinite(s.upper[i]) && x[i] >= s.upper[i] - tol)
              out.push_back(axis(i, 1.0));
          }
        } else if constexpr (std::is_same_v<T, Ball>) {
          const Vector d = x - s.center;
          const double r = d.norm();
          if (s.radius <= tol) {
            for (Index i = 0; i < n; ++i) {
              out.push_back(axis(i, 1.0));
              out.push_back(axis(i, -1.0));
            }
          } else if (r >= s.radius - tol) {
            out.push_back(d / r);
          }
        } else if constexpr (std::is_same_v<T, Halfspace>) {
          if (s.normal.dot(x) >= s.offset - tol)
            out.push_back(s.normal);
        } else if constexpr (std::is_same_v<T, NonnegOrthant> || std::is_same_v<T, Halfline>) {
          for (Index i = 0; i < n; ++i)
            if (x[i] <= tol)
              out.push_back(axis(i, -1.0));
        } else {
          for (const auto &m : s.members) {
            auto g = normal_cone_generators(m, x);
            out.insert(out.end(), g.begin(), g.end());
          }
        }
      },
      c.shape());
  return out;
}

/// Moreau decomposition u = proj_{T_C(x)} u + proj_{N_C(x)} u.
inline ConePair moreau_decompose(const ConvexSet &c, const Vector &x, const Vector &u) {
  require_dim(x.size(), c.dim(), "moreau_decompose point");
  require_dim(u.size(), c.dim(), "moreau_decompose direction");
  if (!contains(c, x))
    throw PreconditionError("moreau_decompose: base point is not in the set (distance " +
                            std::to_string(distance(c, x)) + ")");

  const auto gens = normal_cone_generators(c, x);
  if (gens.empty())
    return {u, Vector::Zero(u.size())};

  // Coordinate generators only: the tangent cone is a product of half-lines, clamp.
  bool axis_only = true;
  Vector lower_cut = Vector::Constant(u.size(), -kInf);
  Vector upper_cut = Vector::Constant(u.size(), kInf);
  for (const auto &g : gens) {
    Index i = 0;
    double sign = 0.0;
    if (!detail::is_signed_axis(g, i, sign)) {
      axis_only = false;
      break;
    }
    if (sign > 0.0)
      upper_cut[i] = 0.0;
    else
      lower_cut[i] = 0.0;
  }
  if (axis_only) {
    Vector tangential = u.cwiseMax(lower_cut).cwiseMin(upper_cut);
    Vector normal = u - tangential;
    return {std::move(tangential), std::move(normal)};
  }

  Matrix a(u.size(), static_cast<Index>(gens.size()));
  for (std::size_t j = 0; j < gens.size(); ++j)
    a.col(static_cast<Index>(j)) = gens[j];
  auto weights = detail::nnls(a, u);
  const Vector lambda = weights ? *weights : detail::cone_weights_projected_gradient(a, u, 20000);
  Vector normal = a * lambda;
  Vector tangential = u - normal;
  return {std::move(tangential), std::move(normal)};
}

/// proj_{T_C(x)} u.
inline Vector tangent_project(const ConvexSet &c, const Vector &x, const Vector &u) {
  return moreau_decompose(c, x, u).tangential;
}

// ---------------------------------------------------------------------------
// delta-approximate normal cone certificates
// ---------------------------------------------------------------------------

struct ProbeSpec {
  int random = 64;
  std::uint64_t seed = 0;
  /// Half-width of the sampling window for unbounded sets; default 10 (1 + ||x||).
  std::optional<double> window;
  /// Include the exact maximizer of <v, z> over the (windowed) set when computable.
  bool extremes = true;
};

struct NormalConeCertificate {
  bool holds = false;
  double worst_violation = -kInf; ///< max over probes of <v, z - x>
  Vector witness;
  double delta = 0.0;
  std::optional<double> window; ///< set when C is unbounded
  int probes = 0;
};

namespace detail {

/// argmax <v, z> over the box [lo, hi] intersected with { <n, z> <= beta }.
/// Continuous knapsack: start from the box maximizer and buy back constraint
/// slack in order of cheapest objective loss.
inline std::optional<Vector> box_halfspace_support(const Vector &lo, const Vector &hi, const Vector &n,
                                                   double beta, const Vector &v) {
  const Index dim = lo.size();
  Vector z(dim);
  for (Index i = 0; i < dim; ++i)
    z[i] = v[i] > 0.0 ? hi[i] : (v[i] < 0.0 ? lo[i] : (n[i] > 0.0 ? lo[i] : hi[i]));
  double excess = n.dot(z) - beta;
  if (excess <= 0.0)
    return z;
  struct Move {
    Index i;
    double cost;
    double capacity;
    double target;
  };
  std::vector<Move> moves;
  for (Index i = 0; i < dim; ++i) {
    const double target = z[i] == hi[i] ? lo[i] : hi[i];
    const double step = target - z[i];
    const double reduction = -n[i] * step;
    if (reduction > 0.0)
      moves.push_back({i, std::abs(v[i] * step) / reduction, reduction, target});
  }
  std::sort(moves.begin(), moves.end(), [](const Move &a, const Move &b) { return a.cost < b.cost; });
  for (const auto &m : moves) {
    if (excess <= 0.0)
      break;
    if (m.capacity <= excess) {
      z[m.i] = m.target;
      excess -= m.capacity;
    } else {
      const double frac = excess / m.capacity;
      z[m.i] += frac * (m.target - z[m.i]);
      excess = 0.0;
    }
  }
  if (excess > 1e-12 * (1.0 + std::abs(beta)))
    return std::nullopt;
  return z;
}

inline std::optional<Vector> support_point(const ConvexSet &c, const Vector &v, const Vector &wlo,
                                           const Vector &whi) {
  if (auto bb = c.box_bounds()) {
    const Vector lo = bb->first.cwiseMax(wlo);
    const Vector hi = bb->second.cwiseMin(whi).cwiseMax(lo);
    Vector z(v.size());
    for (Index i = 0; i < v.size(); ++i)
      z[i] = v[i] > 0.0 ? hi[i] : lo[i];
    return z;
  }
  if (const auto *b = std::get_if<Ball>(&c.shape())) {
    const double nv = v.norm();
    if (nv == 0.0)
      return b->center;
    return Vector(b->center + (b->radius / nv) * v);
  }
  if (const auto *h = std::get_if<Halfspace>(&c.shape()))
    return box_halfspace_support(wlo, whi, h->normal, h->offset, v);
  return std::nullopt;
}

inline double bounding_halfwidth(const ConvexSet &c, const Vector &x) {
  if (auto bb = c.box_bounds())
    return std::max((bb->second - x).cwiseAbs().maxCoeff(), (bb->first - x).cwiseAbs().maxCoeff());
  if (const auto *b = std::get_if<Ball>(&c.shape()))
    return (b->center - x).cwiseAbs().maxCoeff() + b->radius;
  double w = kInf;
  if (const auto *s = std::get_if<Intersection>(&c.shape()))
    for (const auto &m : s->members)
      if (m.bounded())
        w = std::min(w, bounding_halfwidth(m, x));
  return w;
}

} // namespace detail

/// Probes sup_{z in C} <v, z - x> <= delta on a finite sample of C.
/// For unbounded C the sample is confined to the box window [x - W, x + W].
inline NormalConeCertificate in_approx_normal_cone(const ConvexSet &c, const Vector &x, const Vector &v,
                                                   double delta, const ProbeSpec &probes) {
  require_dim(x.size(), c.dim(), "in_approx_normal_cone point");
  require_dim(v.size(), c.dim(), "in_approx_normal_cone vector");
  require(delta >= 0.0, "in_approx_normal_cone: delta must be nonnegative");
  require(probes.random > 0 || probes.extremes, "in_approx_normal_cone: empty probe set");
  if (!contains(c, x))
    throw PreconditionError("in_approx_normal_cone: base point is not in the set");

  NormalConeCertificate cert;
  cert.delta = delta;
  double halfwidth = 0.0;
  if (c.bounded()) {
    halfwidth = detail::bounding_halfwidth(c, x);
  } else {
    halfwidth = probes.window.value_or(10.0 * (1.0 + x.norm()));
    require(halfwidth > 0.0, "in_approx_normal_cone: window must be positive");
    cert.window = halfwidth;
  }
  const Vector wlo = (x.array() - halfwidth).matrix();
  const Vector whi = (x.array() + halfwidth).matrix();

  auto consider = [&](const Vector &z) {
    const double val = v.dot(z - x);
    ++cert.probes;
    if (val > cert.worst_violation) {
      cert.worst_violation = val;
      cert.witness = z;
    }
  };

  consider(x);
  if (probes.extremes) {
    if (const auto *s = std::get_if<Intersection>(&c.shape())) {
      for (const auto &m : s->members)
        if (auto z = detail::support_point(m, v, wlo, whi))
          consider(project(c, *z));
    } else if (auto z = detail::support_point(c, v, wlo, whi)) {
      consider(*z);
    }
  }
  Rng rng(probes.seed);
  for (int i = 0; i < probes.random; ++i)
    consider(sample_point(c, rng, x, halfwidth));

  const double tol = 1e-12 * (1.0 + v.norm() * (1.0 + x.norm()));
  cert.holds = cert.worst_violation <= delta + tol;
  return cert;
}

} // namespace catchup
