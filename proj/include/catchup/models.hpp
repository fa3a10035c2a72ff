#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "catchup/core.hpp"
#include "catchup/diagnostics.hpp"
#include "catchup/geometry.hpp"
#include "catchup/operators.hpp"
#include "catchup/scheme.hpp"

namespace catchup {

// ---------------------------------------------------------------------------
// One-dimensional model: C = [0, inf), G(x) = {x}, f(x) = -a x + b
// ---------------------------------------------------------------------------

struct OneDimModel {
  double a = 1.0;
  double b = 2.0;

  double rate() const { return a + 1.0; }
  double gamma() const { return 0.5 * (a + 1.0); }
  double m() const { return b * b / (2.0 * (a + 1.0)); }
  double ell() const { return -(a + 1.0); }
  /// Zero of F, the equilibrium of the unconstrained field.
  double free_equilibrium() const { return b / (a + 1.0); }
};

inline void validate(const OneDimModel &p) {
  require(std::isfinite(p.a) && p.a > 0.0, "onedim model: a must be positive");
  require(std::isfinite(p.b), "onedim model: b must be finite");
}

inline double onedim_equilibrium(const OneDimModel &p) {
  validate(p);
  return p.b > 0.0 ? p.free_equilibrium() : 0.0;
}

/// Time at which the flow from x0 reaches 0; infinite when it never does.
inline double onedim_hitting_time(const OneDimModel &p, double x0) {
  validate(p);
  require(x0 >= 0.0, "onedim flow: x0 must be nonnegative");
  if (p.b >= 0.0)
    return x0 == 0.0 && p.b == 0.0 ? 0.0 : kInf;
  const double xs = p.free_equilibrium();
  return std::log((x0 - xs) / (-xs)) / p.rate();
}

/// Exact solution of the projected ODE on [0, inf).
inline double onedim_exact_flow(const OneDimModel &p, double x0, double t) {
  validate(p);
  require(x0 >= 0.0, "onedim flow: x0 must be nonnegative");
  require(t >= 0.0, "onedim flow: t must be nonnegative");
  const double xs = p.free_equilibrium();
  if (p.b < 0.0 && t >= onedim_hitting_time(p, x0))
    return 0.0;
  return std::max(0.0, xs + (x0 - xs) * std::exp(-p.rate() * t));
}

/// x(t)^2 <= e^{-(a+1)t} x0^2 + b^2/(a+1)^2 (1 - e^{-(a+1)t}).
inline double onedim_energy_bound(const OneDimModel &p, double x0, double t) {
  validate(p);
  const double e = std::exp(-p.rate() * t);
  return e * x0 * x0 + (p.b * p.b) / (p.rate() * p.rate()) * (-std::expm1(-p.rate() * t));
}

/// The model with (A2) constants (|b|, a+1), (A3) constants gamma = (a+1)/2,
/// M = b^2/(2(a+1)), and R* small enough that the globalized constant equals M.
inline MonotoneModel make_onedim_model(const OneDimModel &p) {
  validate(p);
  const double a0 = std::abs(p.b);
  const double b0 = p.rate();
  const double gamma = p.gamma();
  const double m = p.m();
  double r_star = 1e-6;
  if (m > 0.0) {
    const double k = b0 + gamma;
    r_star = (-a0 + std::sqrt(a0 * a0 + 4.0 * k * m)) / (2.0 * k);
    r_star *= 1.0 - 1e-12;
  }
  MonotoneModel model{VectorField::affine(Matrix::Constant(1, 1, -p.a), Vector::Constant(1, p.b)),
                      RegularPart::linear(Matrix::Identity(1, 1)),
                      ConvexSet::halfline(),
                      {a0, b0},
                      {r_star, m, gamma},
                      p.ell(),
                      "onedim",
                      "l = -(a+1): F is affine with slope -(a+1)"};
  return model;
}

inline ReferenceTrajectory onedim_exact_reference(const OneDimModel &p, double x0, double horizon) {
  validate(p);
  require(x0 >= 0.0, "onedim flow: x0 must be nonnegative");
  ReferenceTrajectory ref;
  ref.at = [p, x0](double t) { return Vector::Constant(1, onedim_exact_flow(p, x0, t)); };
  ref.mesh = 0.0;
  ref.horizon = horizon;
  ref.source = "exact_flow";
  return ref;
}

// ---------------------------------------------------------------------------
// Dry friction: f = tau - K x, G = d(sum mu_i |x_i|), C = box
// ---------------------------------------------------------------------------

struct DryFrictionModel {
  Matrix k;
  Vector tau;
  Vector weights;
  Vector lower;
  Vector upper;
  double gamma = 1.0;

  Index dim() const { return tau.size(); }
  /// max ||x|| over the box.
  double r_c() const { return lower.cwiseAbs().cwiseMax(upper.cwiseAbs()).norm(); }
  double k_norm() const { return k.operatorNorm(); }
  double bound_l() const {
    return tau.norm() + k_norm() * r_c() + std::sqrt(static_cast<double>(dim())) * weights.maxCoeff();
  }
};

inline void validate(const DryFrictionModel &p) {
  const Index n = p.tau.size();
  require(n > 0, "dry friction: empty state");
  require(p.k.rows() == n && p.k.cols() == n, "dry friction: K must be n x n");
  require_dim(p.weights.size(), n, "dry friction weights");
  require_dim(p.lower.size(), n, "dry friction lower bound");
  require_dim(p.upper.size(), n, "dry friction upper bound");
  require(p.lower.allFinite() && p.upper.allFinite(), "dry friction: box must be bounded");
  require((p.lower.array() < p.upper.array()).all(), "dry friction: need lower < upper");
  require((p.weights.array() > 0.0).all(), "dry friction: friction weights must be positive");
  require(p.gamma > 0.0, "dry friction: gamma must be positive");
  require((p.k - p.k.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + p.k.cwiseAbs().maxCoeff()),
          "dry friction: K must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.k, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > 0.0, "dry friction: K must be positive definite");
}

/// Compact-box constants: M = L R_C + gamma R_C^2 with R* = R_C.
inline MonotoneModel make_dry_friction_model(const DryFrictionModel &p) {
  validate(p);
  const double rc = p.r_c();
  const double l = p.bound_l();
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.k, Eigen::EigenvaluesOnly);
  MonotoneModel model{VectorField::affine(-p.k, p.tau),
                      RegularPart::separable_l1(p.weights),
                      ConvexSet::box(p.lower, p.upper),
                      {p.tau.norm() + std::sqrt(static_cast<double>(p.dim())) * p.weights.maxCoeff(), p.k_norm()},
                      {rc, l * rc + p.gamma * rc * rc, p.gamma},
                      -es.eigenvalues().minCoeff(),
                      "dry_friction",
                      "l = -lambda_min(K), from monotonicity of the friction subdifferential"};
  return model;
}

// ---------------------------------------------------------------------------
// Equilibria
// ---------------------------------------------------------------------------

struct EquilibriumCheck {
  bool holds = false;
  Vector snapped; ///< point at which the inclusion was evaluated
  double gap = 0.0; ///< max over coordinates of the distance between F_i(x) and N_C(x)_i
  double tolerance = 0.0;
};

/// Checks 0 in F(x) - N_C(x) by interval arithmetic. Coordinates within `tol`
/// of a kink of G (zero) or of a box face are first moved onto it.
inline EquilibriumCheck verify_equilibrium(const MonotoneModel &model, const Vector &x, double tol) {
  require_dim(x.size(), model.dim(), "equilibrium point");
  require(tol >= 0.0, "equilibrium: tolerance must be nonnegative");
  EquilibriumCheck eq;
  eq.tolerance = tol * (1.0 + model.growth.b);
  eq.snapped = x;
  const auto bb = model.c.box_bounds();
  if (!bb) {
    const IntervalSet fx = model.F(x);
    if (!fx.is_singleton())
      throw PreconditionError("verify_equilibrium: set-valued F on a non-box set is not supported");
    eq.gap = tangent_project(model.c, x, fx.lower).norm();
    eq.holds = eq.gap <= eq.tolerance + membership_tolerance(x);
    return eq;
  }
  const Vector &lo = bb->first;
  const Vector &hi = bb->second;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) <= tol && lo[i] <= 0.0 && 0.0 <= hi[i])
      eq.snapped[i] = 0.0;
    if (std::isfinite(lo[i]) && std::abs(x[i] - lo[i]) <= tol)
      eq.snapped[i] = lo[i];
    if (std::isfinite(hi[i]) && std::abs(x[i] - hi[i]) <= tol)
      eq.snapped[i] = hi[i];
  }
  if (!contains(model.c, eq.snapped))
    throw PreconditionError("verify_equilibrium: point is not in C");
  const IntervalSet fx = model.F(eq.snapped);
  for (Index i = 0; i < x.size(); ++i) {
    // N_C(x)_i is {0}, (-inf, 0], [0, inf) or R.
    double n_lo = 0.0;
    double n_hi = 0.0;
    if (std::isfinite(lo[i]) && eq.snapped[i] <= lo[i])
      n_lo = -kInf;
    if (std::isfinite(hi[i]) && eq.snapped[i] >= hi[i])
      n_hi = kInf;
    const double gap = std::max({0.0, fx.lower[i] - n_hi, n_lo - fx.upper[i]});
    eq.gap = std::max(eq.gap, gap);
  }
  eq.holds = eq.gap <= eq.tolerance;
  return eq;
}

// ---------------------------------------------------------------------------
// Fine-mesh references
// ---------------------------------------------------------------------------

/// Exact-projection run on a uniform mesh, exposed as an interpolable trajectory.
inline ReferenceTrajectory reference_solution(const MonotoneModel &model, const Vector &x0, double horizon,
                                              double mesh) {
  require(mesh > 0.0, "reference solution: mesh must be positive");
  auto sched = make_schedule(UniformSteps{mesh}, ZeroError{}, horizon);
  auto r = std::make_shared<DiscreteRun>(run(model, x0, sched));
  if (!r->complete)
    throw GeometryError("reference solution: " + r->failure);
  ReferenceTrajectory ref;
  const double end = r->final_time();
  ref.at = [r, end](double t) { return interpolate_state(*r, std::min(t, end)); };
  ref.mesh = mesh;
  ref.horizon = end;
  ref.source = "fine_run";
  return ref;
}

/// Fine-mesh reference for the one-dimensional model, cross-checked against the exact flow.
inline ReferenceTrajectory reference_solution(const OneDimModel &p, double x0, double horizon, double mesh) {
  auto ref = reference_solution(make_onedim_model(p), Vector::Constant(1, x0), horizon, mesh);
  const double tol = std::max(1e-4, 0.5 * mesh * p.rate() * std::abs(x0 - p.free_equilibrium()));
  double err = 0.0;
  const auto n = static_cast<Index>(std::floor(ref.horizon / mesh + 1e-9));
  for (Index k = 0; k <= n; ++k) {
    const double t = std::min(ref.horizon, static_cast<double>(k) * mesh);
    err = std::max(err, std::abs(ref.at(t)[0] - onedim_exact_flow(p, x0, t)));
  }
  if (err > tol)
    throw Error("reference solution disagrees with the exact flow: sup error " + std::to_string(err) + " > " +
                std::to_string(tol));
  return ref;
}

struct ModelInfo {
  std::string name;
  std::string description;
};

inline std::vector<ModelInfo> list_models() {
  return {{"onedim", "C = [0, inf), f(x) = -a x + b, G(x) = {x}; parameters a > 0, b"},
          {"dry_friction", "C = box, f(x) = tau - K x, G = subdifferential of sum mu_i |x_i|; parameters K, tau, "
                           "mu, lower, upper, gamma"}};
}

} // namespace catchup
