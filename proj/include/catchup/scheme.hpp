#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "catchup/core.hpp"
#include "catchup/geometry.hpp"
#include "catchup/operators.hpp"

namespace catchup {

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

struct UniformSteps {
  double mu0 = 0.01;
};
/// mu_k = mu0 / (k + 1)^alpha.
struct PolynomialSteps {
  double mu0 = 0.1;
  double alpha = 1.0;
};
struct ExplicitSteps {
  std::vector<double> mu;
};
using StepKind = std::variant<UniformSteps, PolynomialSteps, ExplicitSteps>;

struct ZeroError {};
/// eps_k = eps0 * mu_k^(2 + beta).
struct PowerOfStepError {
  double eps0 = 1.0;
  double beta = 1.0;
};
struct ExplicitError {
  std::vector<double> eps;
};
using ErrorRule = std::variant<ZeroError, PowerOfStepError, ExplicitError>;

inline std::string step_kind_name(const StepKind &k) {
  static constexpr const char *names[] = {"uniform", "polynomial", "explicit"};
  return names[k.index()];
}

inline std::string error_rule_name(const ErrorRule &r) {
  static constexpr const char *names[] = {"zero", "power_of_step", "explicit"};
  return names[r.index()];
}

/// Steps and tolerances on the grid t_0 = 0 < ... < t_{k_T} <= T.
struct StepSchedule {
  StepKind kind;
  ErrorRule error_rule;
  double horizon = 0.0;
  std::vector<double> mu;    ///< mu_0 .. mu_{k_T - 1}
  std::vector<double> eps;   ///< eps_0 .. eps_{k_T - 1}
  std::vector<double> times; ///< t_0 .. t_{k_T}
  double q_T = 0.0;          ///< sup eps_k / mu_k^2
  double mu_max = 0.0;       ///< ||mu||_T
  std::vector<std::string> warnings;

  Index steps() const { return static_cast<Index>(mu.size()); }
  double final_time() const { return times.back(); }
  double sum_mu_sq() const {
    double s = 0.0;
    for (double m : mu)
      s += m * m;
    return s;
  }
};

inline constexpr Index kMaxScheduleSteps = 50'000'000;

inline StepSchedule make_schedule(StepKind kind, ErrorRule rule, double horizon) {
  require(std::isfinite(horizon) && horizon > 0.0, "schedule: horizon must be positive");
  StepSchedule s;
  s.kind = std::move(kind);
  s.error_rule = std::move(rule);
  s.horizon = horizon;
  const double tol = 1e-10 * std::max(1.0, horizon);
  s.times.push_back(0.0);

  if (const auto *u = std::get_if<UniformSteps>(&s.kind)) {
    require(std::isfinite(u->mu0) && u->mu0 > 0.0, "schedule: mu0 must be positive");
    const double count = std::floor(horizon / u->mu0 + tol / u->mu0);
    if (count > static_cast<double>(kMaxScheduleSteps))
      throw ConfigError("schedule: more than " + std::to_string(kMaxScheduleSteps) + " steps");
    require(count >= 1.0, "schedule: horizon shorter than one step");
    const auto n = static_cast<Index>(count);
    s.mu.assign(static_cast<std::size_t>(n), u->mu0);
    for (Index k = 1; k <= n; ++k)
      s.times.push_back(static_cast<double>(k) * u->mu0);
  } else {
    std::vector<double> explicit_mu;
    const auto *poly = std::get_if<PolynomialSteps>(&s.kind);
    if (poly) {
      require(std::isfinite(poly->mu0) && poly->mu0 > 0.0, "schedule: mu0 must be positive");
      if (!(poly->alpha > 0.0 && poly->alpha <= 1.0))
        throw PreconditionError("schedule: polynomial exponent alpha must lie in (0, 1]");
    } else {
      explicit_mu = std::get<ExplicitSteps>(s.kind).mu;
      for (std::size_t k = 0; k < explicit_mu.size(); ++k) {
        require(std::isfinite(explicit_mu[k]) && explicit_mu[k] > 0.0,
                "schedule: explicit step " + std::to_string(k) + " must be positive");
        require(k == 0 || explicit_mu[k] <= explicit_mu[k - 1],
                "schedule: explicit steps must be nonincreasing (index " + std::to_string(k) + ")");
      }
    }
    double t = 0.0;
    for (Index k = 0;; ++k) {
      if (k >= kMaxScheduleSteps)
        throw ConfigError("schedule: horizon not reached within " + std::to_string(kMaxScheduleSteps) + " steps");
      double m = 0.0;
      if (poly) {
        m = poly->mu0 / std::pow(static_cast<double>(k + 1), poly->alpha);
      } else {
        if (static_cast<std::size_t>(k) >= explicit_mu.size()) {
          if (t < horizon - tol)
            throw ConfigError("schedule: explicit steps sum to " + std::to_string(t) + " < horizon " +
                              std::to_string(horizon));
          break;
        }
        m = explicit_mu[static_cast<std::size_t>(k)];
      }
      if (t + m > horizon + tol)
        break;
      t += m;
      s.mu.push_back(m);
      s.times.push_back(t);
    }
    require(!s.mu.empty(), "schedule: horizon shorter than the first step");
  }

  const std::size_t n = s.mu.size();
  if (std::holds_alternative<ZeroError>(s.error_rule)) {
    s.eps.assign(n, 0.0);
  } else if (const auto *p = std::get_if<PowerOfStepError>(&s.error_rule)) {
    require(p->eps0 >= 0.0 && std::isfinite(p->eps0), "schedule: eps0 must be nonnegative");
    require(p->beta > 0.0, "schedule: beta must be positive");
    for (double m : s.mu)
      s.eps.push_back(p->eps0 * std::pow(m, 2.0 + p->beta));
  } else {
    const auto &list = std::get<ExplicitError>(s.error_rule).eps;
    if (list.size() < n)
      throw ConfigError("schedule: explicit tolerance list has " + std::to_string(list.size()) +
                        " entries but the grid needs " + std::to_string(n));
    for (std::size_t k = 0; k < n; ++k) {
      require(std::isfinite(list[k]) && list[k] >= 0.0,
              "schedule: explicit tolerance " + std::to_string(k) + " must be nonnegative");
      s.eps.push_back(list[k]);
    }
    // eps_k / mu_k^2 must tend to zero. On a finite list, flag ratios that do
    // not decay between the first and the last quarter of the grid.
    if (n >= 4) {
      const std::size_t quarter = n / 4;
      double head = 0.0;
      double tail = 0.0;
      std::size_t tail_index = n - 1;
      for (std::size_t k = 0; k < quarter; ++k)
        head = std::max(head, s.eps[k] / (s.mu[k] * s.mu[k]));
      for (std::size_t k = n - quarter; k < n; ++k) {
        const double r = s.eps[k] / (s.mu[k] * s.mu[k]);
        if (r > tail) {
          tail = r;
          tail_index = k;
        }
      }
      if (tail > 0.0 && tail >= 0.5 * head)
        s.warnings.push_back("eps_k/mu_k^2 does not decay along the explicit list (ratio " + std::to_string(tail) +
                             " at index " + std::to_string(tail_index) + ")");
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    s.q_T = std::max(s.q_T, s.eps[k] / (s.mu[k] * s.mu[k]));
    s.mu_max = std::max(s.mu_max, s.mu[k]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// One step and a full run
// ---------------------------------------------------------------------------

struct StepRecord {
  Vector x_next; ///< x_{k+1}
  Vector y;      ///< predictor y_{k+1} = x_k + mu_k w_k
  Vector w;      ///< selection w_k in F(x_k)
  Vector p;      ///< defect x_{k+1} - y_{k+1}
  Vector v;      ///< normal term, (x_{k+1} - x_k)/mu_k = w_k - v_k
  double eps = 0.0; ///< tolerance the projection is certified for
};

inline StepRecord step_with(const Vector &x, const MonotoneModel &model, double mu, double eps,
                            SelectionPolicy &selection, ApproxPolicy &approx) {
  require(mu > 0.0, "step: mu must be positive");
  StepRecord r;
  r.w = select_F(model, x, selection);
  r.y = x + mu * r.w;
  auto proj = approx_project_certified(model.c, r.y, eps, approx);
  r.x_next = std::move(proj.point);
  r.eps = proj.eps_bound;
  // p = (x_{k+1} - x_k) - mu w = x_{k+1} - y. Forming it from y keeps p exactly
  // zero when the projection returns y, so no roundoff normal term appears.
  r.p = r.x_next - r.y;
  r.v = r.p.isZero(0.0) ? Vector(Vector::Zero(x.size())) : Vector(-r.p / mu);
  return r;
}

inline StepRecord step(const Vector &x, const MonotoneModel &model, const StepSchedule &schedule, Index k,
                       SelectionPolicy &selection, ApproxPolicy &approx) {
  require(k >= 0 && k < schedule.steps(), "step: index outside the schedule");
  require_dim(x.size(), model.dim(), "step");
  if (!contains(model.c, x))
    throw PreconditionError("step: x_k is not in C");
  const auto ku = static_cast<std::size_t>(k);
  return step_with(x, model, schedule.mu[ku], schedule.eps[ku], selection, approx);
}

struct RunOptions {
  SelectionPolicy selection = SelectionPolicy::minimal_norm();
  ApproxPolicy approx = ApproxPolicy::exact();
};

/// Full record of one catching-up execution.
struct DiscreteRun {
  std::vector<double> times; ///< t_0 .. t_n
  std::vector<Vector> x;     ///< x_0 .. x_n
  std::vector<Vector> w;     ///< w_0 .. w_{n-1}
  std::vector<Vector> y;     ///< y_1 .. y_n (y[k] is the predictor of step k)
  std::vector<Vector> p;
  std::vector<Vector> v;
  std::vector<double> mu;
  std::vector<double> eps; ///< certified tolerance per step
  std::optional<StepSchedule> schedule;
  std::string model_name;
  std::string selection;
  std::uint64_t selection_seed = 0;
  std::string approx;
  std::uint64_t approx_seed = 0;
  bool complete = true;
  std::string failure;

  Index steps() const { return static_cast<Index>(mu.size()); }
  Index dim() const { return x.empty() ? 0 : x.front().size(); }
  double final_time() const { return times.back(); }

  double max_norm() const {
    double m = 0.0;
    for (const auto &xk : x)
      m = std::max(m, xk.norm());
    return m;
  }
  double mesh() const {
    double m = 0.0;
    for (double s : mu)
      m = std::max(m, s);
    return m;
  }
  double q() const {
    double q = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k)
      q = std::max(q, eps[k] / (mu[k] * mu[k]));
    return q;
  }
  double sum_mu_sq() const {
    double s = 0.0;
    for (double m : mu)
      s += m * m;
    return s;
  }
  double sum_eps() const {
    double s = 0.0;
    for (double e : eps)
      s += e;
    return s;
  }
};

/// Runs the scheme to k_T. A failing step ends the run; the partial record is
/// returned with complete = false.
inline DiscreteRun run(const MonotoneModel &model, const Vector &x0, const StepSchedule &schedule,
                       RunOptions options = {}) {
  require_dim(x0.size(), model.dim(), "initial point");
  if (!contains(model.c, x0))
    throw PreconditionError("initial point is not in C (distance " + std::to_string(distance(model.c, x0)) + ")");
  DiscreteRun r;
  r.schedule = schedule;
  r.model_name = model.name;
  r.selection = options.selection.name();
  r.selection_seed = options.selection.seed();
  r.approx = options.approx.name();
  r.approx_seed = options.approx.seed();
  const auto n = static_cast<std::size_t>(schedule.steps());
  r.times.reserve(n + 1);
  r.x.reserve(n + 1);
  for (auto *vec : {&r.w, &r.y, &r.p, &r.v})
    vec->reserve(n);
  r.times.push_back(0.0);
  r.x.push_back(x0);
  for (std::size_t k = 0; k < n; ++k) {
    StepRecord s;
    try {
      s = step_with(r.x.back(), model, schedule.mu[k], schedule.eps[k], options.selection, options.approx);
    } catch (const Error &e) {
      r.complete = false;
      r.failure = "step " + std::to_string(k) + ": " + e.what();
      break;
    }
    r.w.push_back(std::move(s.w));
    r.y.push_back(std::move(s.y));
    r.p.push_back(std::move(s.p));
    r.v.push_back(std::move(s.v));
    r.mu.push_back(schedule.mu[k]);
    r.eps.push_back(s.eps);
    r.x.push_back(std::move(s.x_next));
    r.times.push_back(schedule.times[k + 1]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// A-priori boundedness constants
// ---------------------------------------------------------------------------

struct AprioriBound {
  double c = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  double lambda_T = 0.0;
  double a_T = 0.0;
  double b_T = 0.0;
  double k_T = 0.0; ///< bound on max_k ||x_k||^2
};

/// Constants of the discrete Gronwall chain, with the even Young split
/// delta = eta = (2 gamma - c) / 2.
inline AprioriBound apriori_bound(const MonotoneModel &model, double x0_norm_sq, double horizon, double mesh,
                                  double q_T, double sum_mu_sq, double c) {
  const double gamma = model.dissipativity.gamma;
  require(c > 0.0 && c < 2.0 * gamma, "a-priori bound: c must lie in (0, 2 gamma)");
  AprioriBound b;
  b.c = c;
  b.delta = b.eta = (2.0 * gamma - c) / 2.0;
  const double inv = 1.0 / b.delta + 1.0 / b.eta;
  const double ga = model.growth.a;
  const double gb = model.growth.b;
  b.lambda_T = -c + 2.0 * gb * gb * inv + 8.0 * gb * gb * mesh;
  b.a_T = 2.0 * model.m_tilde() + 2.0 * ga * ga * inv + q_T / b.delta;
  b.b_T = 8.0 * ga * ga + 2.0 * q_T;
  b.k_T = std::exp(std::max(0.0, b.lambda_T) * horizon) * (x0_norm_sq + b.a_T * horizon + b.b_T * sum_mu_sq);
  return b;
}

inline AprioriBound apriori_bound(const MonotoneModel &model, const DiscreteRun &r, double c) {
  return apriori_bound(model, r.x.front().squaredNorm(), r.final_time(), r.mesh(), r.q(), r.sum_mu_sq(), c);
}

// ---------------------------------------------------------------------------
// Interpolants
// ---------------------------------------------------------------------------

namespace detail {
inline std::size_t locate_cell(const DiscreteRun &r, double t) {
  require(r.steps() > 0, "interpolation: run has no steps");
  const double tol = 1e-12 * std::max(1.0, r.final_time());
  if (t < -tol || t > r.final_time() + tol)
    throw PreconditionError("interpolation: t = " + std::to_string(t) + " outside [0, " +
                            std::to_string(r.final_time()) + "]");
  auto it = std::upper_bound(r.times.begin(), r.times.end(), t);
  std::size_t k = it == r.times.begin() ? 0 : static_cast<std::size_t>(it - r.times.begin()) - 1;
  return std::min(k, r.mu.size() - 1);
}
} // namespace detail

/// Piecewise-affine state interpolant x_mu(t).
inline Vector interpolate_state(const DiscreteRun &r, double t) {
  const std::size_t k = detail::locate_cell(r, t);
  const double s = std::clamp((t - r.times[k]) / r.mu[k], 0.0, 1.0);
  if (s == 0.0)
    return r.x[k];
  if (s == 1.0)
    return r.x[k + 1];
  return r.x[k] + s * (r.x[k + 1] - r.x[k]);
}

/// Piecewise-constant predictor interpolant: y_{k+1} on [t_k, t_{k+1}).
inline Vector interpolate_predictor(const DiscreteRun &r, double t) { return r.y[detail::locate_cell(r, t)]; }

// ---------------------------------------------------------------------------
// Per-step invariants
// ---------------------------------------------------------------------------

struct RunInvariants {
  double feasibility = 0.0; ///< max_k d_C(x_k) minus its membership tolerance
  double eps_contract = -kInf; ///< max_k ||p_k||^2 - (mu_k ||w_k|| + d_C(x_k))^2 - eps_k
  double velocity = 0.0; ///< max_k ||(x_{k+1}-x_k)/mu_k - (w_k - v_k)|| / (1 + ||w_k||)
  double update = 0.0;   ///< max_k ||x_{k+1} - (x_k + mu_k w_k + p_k)|| / (1 + ||x_{k+1}||)
  Index first_violation = -1;
  std::string message;
  bool ok = true;
};

inline RunInvariants verify_run_invariants(const DiscreteRun &r, const ConvexSet &c) {
  RunInvariants inv;
  auto flag = [&](Index k, const std::string &what) {
    if (inv.ok) {
      inv.ok = false;
      inv.first_violation = k;
      inv.message = what + " at step " + std::to_string(k);
    }
  };
  std::vector<double> dist(r.x.size());
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    dist[k] = distance(c, r.x[k]);
    const double excess = dist[k] - membership_tolerance(r.x[k]);
    inv.feasibility = std::max(inv.feasibility, excess);
    if (excess > 0.0)
      flag(static_cast<Index>(k), "iterate outside C");
  }
  for (std::size_t k = 0; k < r.mu.size(); ++k) {
    const auto ki = static_cast<Index>(k);
    const double mu = r.mu[k];
    const double wn = r.w[k].norm();
    // x_k may sit outside C by its membership tolerance (certified intersection
    // points), so d_C(y) <= mu ||w|| + d_C(x_k).
    const double reach = mu * wn + dist[k];
    const double rhs = reach * reach + r.eps[k];
    const double slack = 1e-12 * (1.0 + r.x[k].squaredNorm() + rhs);
    const double lhs = r.p[k].squaredNorm();
    inv.eps_contract = std::max(inv.eps_contract, lhs - rhs);
    if (lhs > rhs + slack)
      flag(ki, "eps-projection contract violated");

    const Vector vel = (r.x[k + 1] - r.x[k]) / mu - (r.w[k] - r.v[k]);
    const double vel_err = vel.norm() / (1.0 + wn);
    inv.velocity = std::max(inv.velocity, vel_err);
    // Roundoff of the difference quotient scales with |x| / mu.
    const double vel_tol = 1e-12 + 4e-16 * (r.x[k].norm() + r.x[k + 1].norm()) / (mu * (1.0 + wn));
    if (vel_err > vel_tol)
      flag(ki, "velocity identity violated");

    const Vector upd = r.x[k + 1] - (r.x[k] + mu * r.w[k] + r.p[k]);
    const double upd_err = upd.norm() / (1.0 + r.x[k + 1].norm() + mu * wn);
    inv.update = std::max(inv.update, upd_err);
    if (upd_err > 1e-14)
      flag(ki, "update identity violated");
  }
  return inv;
}

} // namespace catchup
