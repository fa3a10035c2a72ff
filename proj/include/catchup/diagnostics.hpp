#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "catchup/core.hpp"
#include "catchup/geometry.hpp"
#include "catchup/operators.hpp"
#include "catchup/scheme.hpp"

namespace catchup {

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// One measured quantity against its theoretical bound.
struct CertificateEntry {
  std::string name;
  std::string tag;
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0; ///< bound - measured
  bool pass = false;
  bool hard = true; ///< informational entries never fail a run
  std::string note;
};

struct DiagnosticsReport {
  std::vector<CertificateEntry> entries;

  void add(CertificateEntry e) { entries.push_back(std::move(e)); }

  bool hard_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const CertificateEntry &e) { return e.pass || !e.hard; });
  }

  std::vector<const CertificateEntry *> failures(bool include_informational = false) const {
    std::vector<const CertificateEntry *> out;
    for (const auto &e : entries)
      if (!e.pass && (e.hard || include_informational))
        out.push_back(&e);
    return out;
  }

  const CertificateEntry *find(const std::string &name) const {
    for (const auto &e : entries)
      if (e.name == name)
        return &e;
    return nullptr;
  }
};

inline CertificateEntry make_entry(std::string name, std::string tag, double measured, double bound, bool hard,
                                   std::string note = {}, double slack = 0.0) {
  CertificateEntry e;
  e.name = std::move(name);
  e.tag = std::move(tag);
  e.measured = measured;
  e.bound = bound;
  e.margin = bound - measured;
  e.pass = measured <= bound + slack;
  e.hard = hard;
  e.note = std::move(note);
  return e;
}

// ---------------------------------------------------------------------------
// Constants measured on a run
// ---------------------------------------------------------------------------

struct RunConstants {
  double horizon = 0.0;
  double r_T = 0.0;   ///< max_k ||x_k||
  double m_T = 0.0;   ///< a + b R_T
  double q_T = 0.0;   ///< max eps_k / mu_k^2
  double mesh = 0.0;  ///< ||mu||_T
  double sum_mu_sq = 0.0;
  double sum_eps = 0.0;
  double c_T = 0.0;   ///< M_T^2 sum mu^2 + sum eps
  double m_tilde = 0.0;
};

inline double run_horizon(const DiscreteRun &r) { return r.schedule ? r.schedule->horizon : r.final_time(); }

inline RunConstants run_constants(const MonotoneModel &model, const DiscreteRun &r) {
  RunConstants k;
  k.horizon = run_horizon(r);
  k.r_T = r.max_norm();
  k.m_T = model.growth.a + model.growth.b * k.r_T;
  k.q_T = r.q();
  k.mesh = r.mesh();
  k.sum_mu_sq = r.sum_mu_sq();
  k.sum_eps = r.sum_eps();
  k.c_T = k.m_T * k.m_T * k.sum_mu_sq + k.sum_eps;
  k.m_tilde = model.m_tilde();
  return k;
}

// ---------------------------------------------------------------------------
// Energy
// ---------------------------------------------------------------------------

/// beta(t) = e^{-2 gamma t} ||x0||^2 + (M~/gamma)(1 - e^{-2 gamma t}).
inline double continuous_energy_bound(double x0_norm_sq, double m_tilde, double gamma, double t) {
  require(gamma > 0.0, "energy bound: gamma must be positive");
  require(t >= 0.0, "energy bound: t must be nonnegative");
  const double decay = std::exp(-2.0 * gamma * t);
  return decay * x0_norm_sq + (m_tilde / gamma) * (-std::expm1(-2.0 * gamma * t));
}

inline double continuous_energy_bound(const Vector &x0, double m_tilde, double gamma, double t) {
  return continuous_energy_bound(x0.squaredNorm(), m_tilde, gamma, t);
}

struct EnergyCheck {
  double c = 0.0;
  double delta = 0.0;
  double eta = 0.0;
  double m_T = 0.0;
  double q_T = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  std::vector<double> residuals; ///< lhs - rhs per step
  double worst_residual = -kInf;
  Index worst_index = -1;
  Index violations = 0;
  bool holds = true;
};

/// ||x_{k+1}||^2 <= (1 - c mu_k) ||x_k||^2 + C0 mu_k + C1 mu_k^2 at every step.
inline EnergyCheck check_discrete_energy(const MonotoneModel &model, const DiscreteRun &r, double c) {
  const double gamma = model.dissipativity.gamma;
  if (!(c > 0.0 && c < 2.0 * gamma))
    throw PreconditionError("discrete energy: c must lie in (0, 2 gamma) = (0, " + std::to_string(2.0 * gamma) + ")");
  const RunConstants k = run_constants(model, r);
  EnergyCheck e;
  e.c = c;
  e.delta = e.eta = (2.0 * gamma - c) / 2.0;
  e.m_T = k.m_T;
  e.q_T = k.q_T;
  const double inv = 1.0 / e.delta + 1.0 / e.eta;
  e.c0 = 2.0 * k.m_tilde + inv * k.m_T * k.m_T + k.q_T / e.delta;
  e.c1 = 4.0 * k.m_T * k.m_T + 2.0 * k.q_T;
  e.residuals.reserve(r.mu.size());
  for (std::size_t i = 0; i < r.mu.size(); ++i) {
    const double mu = r.mu[i];
    const double prev = r.x[i].squaredNorm();
    const double rhs = (1.0 - c * mu) * prev + e.c0 * mu + e.c1 * mu * mu;
    const double res = r.x[i + 1].squaredNorm() - rhs;
    e.residuals.push_back(res);
    if (res > e.worst_residual) {
      e.worst_residual = res;
      e.worst_index = static_cast<Index>(i);
    }
    if (res > roundoff_slack(prev + e.c0 * mu)) {
      ++e.violations;
      e.holds = false;
    }
  }
  return e;
}

struct BetaDomination {
  double max_excess = -kInf; ///< max_k ||x_k||^2 - beta(t_k)
  Index worst_index = -1;
  double mesh = 0.0;
};

inline BetaDomination beta_domination(const MonotoneModel &model, const DiscreteRun &r) {
  BetaDomination b;
  b.mesh = r.mesh();
  const double x0 = r.x.front().squaredNorm();
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    const double ex = r.x[k].squaredNorm() -
                      continuous_energy_bound(x0, model.m_tilde(), model.dissipativity.gamma, r.times[k]);
    if (ex > b.max_excess) {
      b.max_excess = ex;
      b.worst_index = static_cast<Index>(k);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Projection defects and predictor feasibility
// ---------------------------------------------------------------------------

struct DefectSum {
  double sum = 0.0;
  double bound = 0.0;
  bool holds = true;
};

/// sum ||p_k||^2 <= M_T^2 sum mu_k^2 + sum eps_k.
inline DefectSum defect_summability(const MonotoneModel &model, const DiscreteRun &r) {
  const RunConstants k = run_constants(model, r);
  DefectSum d;
  for (const auto &p : r.p)
    d.sum += p.squaredNorm();
  d.bound = k.c_T;
  d.holds = d.sum <= d.bound + roundoff_slack(d.bound);
  return d;
}

struct MeasurePoint {
  double threshold = 0.0;
  double measure = 0.0; ///< |{t : d_C(y(t)) > threshold}| / T
  double bound = 0.0;   ///< cesaro / threshold
};

struct PredictorFeasibility {
  double horizon = 0.0;
  double l2 = 0.0; ///< integral of d_C(y)^2
  double l2_bound = 0.0;
  double cesaro = 0.0; ///< (1/T) integral of d_C(y)
  double cesaro_bound = 0.0;
  std::vector<MeasurePoint> measure;
  std::vector<double> distances; ///< d_C(y_{k+1}) per cell
  bool holds = true;
};

/// Integrals of the piecewise-constant predictor interpolant, computed cell by cell.
inline PredictorFeasibility predictor_feasibility(const MonotoneModel &model, const DiscreteRun &r,
                                                  const std::vector<double> &thresholds = {1e-4, 1e-3, 1e-2}) {
  const RunConstants k = run_constants(model, r);
  PredictorFeasibility f;
  f.horizon = k.horizon;
  double integral = 0.0;
  f.distances.reserve(r.y.size());
  for (std::size_t i = 0; i < r.y.size(); ++i) {
    const double d = distance(model.c, r.y[i]);
    f.distances.push_back(d);
    f.l2 += r.mu[i] * d * d;
    integral += r.mu[i] * d;
  }
  f.l2_bound = 2.0 * k.m_T * k.m_T * k.horizon * k.mesh * k.mesh + 2.0 * k.c_T * k.mesh;
  f.cesaro = integral / k.horizon;
  f.cesaro_bound = std::sqrt(f.l2 / k.horizon);
  f.holds = f.l2 <= f.l2_bound + roundoff_slack(f.l2_bound) && f.cesaro <= f.cesaro_bound * (1.0 + 1e-12) + 1e-300;
  for (double thr : thresholds) {
    require(thr > 0.0, "predictor feasibility: thresholds must be positive");
    MeasurePoint m;
    m.threshold = thr;
    for (std::size_t i = 0; i < f.distances.size(); ++i)
      if (f.distances[i] > thr)
        m.measure += r.mu[i];
    m.measure /= k.horizon;
    m.bound = f.cesaro / thr;
    f.holds = f.holds && m.measure <= m.bound * (1.0 + 1e-12);
    f.measure.push_back(m);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Interpolant regularity and normal terms
// ---------------------------------------------------------------------------

struct LipschitzCheck {
  double slope = 0.0; ///< max_k ||x_{k+1} - x_k|| / mu_k, the exact Lipschitz constant of x_mu
  double bound = 0.0; ///< 2 M_T + sqrt(q_T)
  bool holds = true;
};

inline LipschitzCheck interpolant_lipschitz(const MonotoneModel &model, const DiscreteRun &r) {
  const RunConstants k = run_constants(model, r);
  LipschitzCheck l;
  for (std::size_t i = 0; i < r.mu.size(); ++i)
    l.slope = std::max(l.slope, (r.x[i + 1] - r.x[i]).norm() / r.mu[i]);
  l.bound = 2.0 * k.m_T + std::sqrt(k.q_T);
  l.holds = l.slope <= l.bound * (1.0 + 1e-12) + 1e-12;
  return l;
}

struct NormalTermCheck {
  double worst_excess = -kInf; ///< max_k (sup_z <v_k, z - x_{k+1}> - delta_k)
  Index worst_index = -1;
  Index checked = 0;
  bool holds = true;
  bool exact = true; ///< all eps_k == 0
  std::optional<double> window;
};

/// v_k in N_C^{delta_k}(x_{k+1}) with delta_k = eps_k / (2 mu_k), probed per step.
inline NormalTermCheck normal_term_check(const ConvexSet &c, const DiscreteRun &r, ProbeSpec probes) {
  NormalTermCheck n;
  for (std::size_t k = 0; k < r.v.size(); ++k) {
    if (r.eps[k] > 0.0)
      n.exact = false;
    if (r.v[k].isZero(0.0))
      continue;
    const double delta = r.eps[k] / (2.0 * r.mu[k]);
    probes.seed = probes.seed * 6364136223846793005ULL + k;
    const auto cert = in_approx_normal_cone(c, r.x[k + 1], r.v[k], delta, probes);
    ++n.checked;
    if (cert.window)
      n.window = cert.window;
    const double excess = cert.worst_violation - delta;
    if (excess > n.worst_excess) {
      n.worst_excess = excess;
      n.worst_index = static_cast<Index>(k);
    }
    n.holds = n.holds && cert.holds;
  }
  if (n.checked == 0)
    n.worst_excess = 0.0;
  return n;
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

struct StabilityProfile {
  std::vector<double> times;
  std::vector<double> distance; ///< ||x1_k - x2_k||
  std::vector<double> ratio;    ///< distance / (e^{l t} ||dx0||)
  double ell = 0.0;
  double max_ratio = 0.0;
  double tol_mesh = 0.0;
  double mesh = 0.0;
  bool informational = false;
  bool pass = false;
  std::string note;
  DiscreteRun first;
  DiscreteRun second;
};

inline double default_tol_mesh(double mesh, double ell, double horizon) {
  return 5.0 * mesh * (1.0 + std::abs(ell)) * horizon;
}

/// Runs two trajectories on the same schedule and policies and measures the
/// contraction ratio against e^{l t}.
inline StabilityProfile stability_experiment(const MonotoneModel &model, const Vector &x01, const Vector &x02,
                                             const StepSchedule &schedule, const RunOptions &options = {},
                                             std::optional<double> tol_mesh = std::nullopt) {
  if (!model.one_sided_lipschitz)
    throw PreconditionError("stability experiment: the model has no one-sided Lipschitz constant");
  const double dx0 = (x01 - x02).norm();
  if (dx0 == 0.0)
    throw PreconditionError("stability experiment: initial points coincide");
  StabilityProfile s;
  s.ell = *model.one_sided_lipschitz;
  s.note = model.lipschitz_note;
  s.first = run(model, x01, schedule, options);
  s.second = run(model, x02, schedule, options);
  if (!s.first.complete || !s.second.complete)
    throw GeometryError("stability experiment: run failed: " + s.first.failure + s.second.failure);
  s.mesh = schedule.mu_max;
  s.tol_mesh = tol_mesh.value_or(default_tol_mesh(s.mesh, s.ell, schedule.horizon));
  s.informational = s.mesh * (1.0 + std::abs(s.ell)) > 0.1;
  for (std::size_t k = 0; k < s.first.x.size(); ++k) {
    const double t = s.first.times[k];
    const double d = (s.first.x[k] - s.second.x[k]).norm();
    const double r = d / (std::exp(s.ell * t) * dx0);
    s.times.push_back(t);
    s.distance.push_back(d);
    s.ratio.push_back(r);
    s.max_ratio = std::max(s.max_ratio, r);
  }
  s.pass = s.max_ratio <= 1.0 + s.tol_mesh;
  return s;
}

// ---------------------------------------------------------------------------
// Local truncation and corrector stability
// ---------------------------------------------------------------------------

/// A trajectory usable as ground truth: either an exact flow (mesh 0) or a fine run.
struct ReferenceTrajectory {
  std::function<Vector(double)> at;
  double mesh = 0.0;
  double horizon = 0.0;
  std::string source;
};

struct TruncationCheck {
  std::vector<double> ratios; ///< ||z_{k+1} - x_ref(t_{k+1})|| / (mu_k + sqrt(eps_k))
  double max_ratio = 0.0;
  Index worst_index = -1;
  double m_T = 0.0;
  double c_T = 0.0; ///< max{2 M_T + M_T, 1}
  bool holds = true;
};

inline constexpr double kMinReferenceRefinement = 32.0;

/// One coarse step from each reference point x_ref(t_k), compared with x_ref(t_{k+1}).
inline TruncationCheck local_truncation(const MonotoneModel &model, const ReferenceTrajectory &ref,
                                        const StepSchedule &schedule, RunOptions options = {}) {
  const double min_mu = *std::min_element(schedule.mu.begin(), schedule.mu.end());
  if (ref.mesh > 0.0 && min_mu / ref.mesh < kMinReferenceRefinement * (1.0 - 1e-9))
    throw PreconditionError("local truncation: reference mesh " + std::to_string(ref.mesh) +
                            " is not 32x finer than the coarse step " + std::to_string(min_mu));
  require(ref.horizon >= schedule.final_time() * (1.0 - 1e-12), "local truncation: reference horizon too short");
  TruncationCheck tc;
  std::vector<Vector> xs;
  xs.reserve(schedule.times.size());
  double r_T = 0.0;
  for (double t : schedule.times) {
    xs.push_back(ref.at(std::min(t, ref.horizon)));
    r_T = std::max(r_T, xs.back().norm());
  }
  tc.m_T = model.growth.a + model.growth.b * r_T;
  tc.c_T = std::max(3.0 * tc.m_T, 1.0);
  for (std::size_t k = 0; k < schedule.mu.size(); ++k) {
    const auto s = step_with(xs[k], model, schedule.mu[k], schedule.eps[k], options.selection, options.approx);
    const double ratio = (s.x_next - xs[k + 1]).norm() / (schedule.mu[k] + std::sqrt(s.eps));
    tc.ratios.push_back(ratio);
    if (ratio > tc.max_ratio) {
      tc.max_ratio = ratio;
      tc.worst_index = static_cast<Index>(k);
    }
  }
  tc.holds = tc.max_ratio <= tc.c_T;
  return tc;
}

struct CorrectorCheck {
  double lhs = 0.0; ///< ||u - ub||^2
  double rhs = 0.0; ///< (2 + c_T mu)||x - xb||^2 + C_T (mu^2 + eps)
  double c_T = 0.0;
  double big_c_T = 0.0;
  bool holds = true;
};

/// Compares two catching-up corrections from x and xb. rho bounds ||x|| and ||xb||.
inline CorrectorCheck corrector_stability_check(const MonotoneModel &model, const Vector &x, const Vector &xb,
                                                double mu, double eps, double ell, double rho,
                                                SelectionPolicy &selection, ApproxPolicy &approx) {
  require(mu > 0.0 && eps >= 0.0, "corrector stability: mu > 0 and eps >= 0 required");
  if (!contains(model.c, x) || !contains(model.c, xb))
    throw PreconditionError("corrector stability: points must lie in C");
  if (x.norm() > rho * (1.0 + 1e-12) || xb.norm() > rho * (1.0 + 1e-12))
    throw PreconditionError("corrector stability: points must lie in the ball of radius rho");
  const auto s1 = step_with(x, model, mu, eps, selection, approx);
  const auto s2 = step_with(xb, model, mu, eps, selection, approx);
  const double eff_eps = std::max(s1.eps, s2.eps);
  const double m_T = model.growth.a + model.growth.b * rho;
  CorrectorCheck cc;
  cc.c_T = 4.0 * ell;
  cc.big_c_T = std::max(8.0 * m_T * m_T, 8.0);
  cc.lhs = (s1.x_next - s2.x_next).squaredNorm();
  cc.rhs = (2.0 + cc.c_T * mu) * (x - xb).squaredNorm() + cc.big_c_T * (mu * mu + eff_eps);
  cc.holds = cc.lhs <= cc.rhs + roundoff_slack(cc.rhs);
  return cc;
}

/// sup over nodes and cell midpoints of ||x_mu(t) - x_ref(t)||.
inline double sup_error(const DiscreteRun &r, const ReferenceTrajectory &ref) {
  double e = 0.0;
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    e = std::max(e, (r.x[k] - ref.at(r.times[k])).norm());
    if (k + 1 < r.x.size()) {
      const double tm = 0.5 * (r.times[k] + r.times[k + 1]);
      e = std::max(e, (0.5 * (r.x[k] + r.x[k + 1]) - ref.at(tm)).norm());
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

namespace tags {
inline constexpr const char *kInvariants = "scheme.invariants";
inline constexpr const char *kEnergyContinuous = "energy.continuous";
inline constexpr const char *kEnergyDiscrete = "energy.discrete";
inline constexpr const char *kBoundedness = "boundedness.apriori";
inline constexpr const char *kDefect = "defect.summability";
inline constexpr const char *kFeasibilityL2 = "feasibility.l2";
inline constexpr const char *kFeasibilityCesaro = "feasibility.cesaro";
inline constexpr const char *kFeasibilityMeasure = "feasibility.measure";
inline constexpr const char *kLipschitz = "lipschitz.interpolant";
inline constexpr const char *kNormalCone = "normal_cone.approx";
inline constexpr const char *kGrowth = "hypotheses.growth";
inline constexpr const char *kDissipativity = "hypotheses.dissipativity";
inline constexpr const char *kContraction = "stability.contraction";
inline constexpr const char *kTruncation = "truncation.local";
inline constexpr const char *kCorrector = "corrector.stability";

inline const std::vector<std::string> &run_tags() {
  static const std::vector<std::string> all = {kInvariants,        kEnergyContinuous, kEnergyDiscrete,
                                               kBoundedness,       kDefect,           kFeasibilityL2,
                                               kFeasibilityCesaro, kFeasibilityMeasure, kLipschitz,
                                               kNormalCone,        kGrowth,           kDissipativity};
  return all;
}
} // namespace tags

struct DiagnosticsOptions {
  /// Empty means every run-level tag.
  std::set<std::string> tags;
  std::optional<double> c; ///< energy decay rate, default gamma
  std::vector<double> thresholds = {1e-4, 1e-3, 1e-2};
  ProbeSpec probes{16, 7, std::nullopt, true};
  SampleSpec samples{2000, 0.0, 0.0, 11, {}};

  bool wants(const std::string &tag) const { return tags.empty() || tags.count(tag) > 0; }
};

inline DiagnosticsReport diagnose(const MonotoneModel &model, const DiscreteRun &r,
                                  const DiagnosticsOptions &opt = {}) {
  DiagnosticsReport rep;
  const RunConstants k = run_constants(model, r);
  const double c = opt.c.value_or(model.dissipativity.gamma);

  if (opt.wants(tags::kInvariants)) {
    const auto inv = verify_run_invariants(r, model.c);
    auto e = make_entry("run_invariants", tags::kInvariants, inv.ok ? 0.0 : 1.0, 0.0, true,
                        inv.ok ? "feasibility, eps-contract, velocity and update identities" : inv.message);
    rep.add(e);
    if (!r.complete)
      rep.add(make_entry("run_complete", tags::kInvariants, 1.0, 0.0, true, r.failure));
  }
  if (opt.wants(tags::kEnergyContinuous)) {
    const auto b = beta_domination(model, r);
    rep.add(make_entry("beta_domination", tags::kEnergyContinuous, b.max_excess, 0.0, false,
                       "max_k ||x_k||^2 - beta(t_k); expected O(mesh), mesh = " + std::to_string(b.mesh)));
  }
  if (opt.wants(tags::kEnergyDiscrete)) {
    const auto e = check_discrete_energy(model, r, c);
    rep.add(make_entry("discrete_energy", tags::kEnergyDiscrete, e.worst_residual, 0.0, true,
                       "c=" + std::to_string(e.c) + " C0=" + std::to_string(e.c0) + " C1=" + std::to_string(e.c1) +
                           " violations=" + std::to_string(e.violations)));
    rep.entries.back().pass = e.holds;
  }
  if (opt.wants(tags::kBoundedness)) {
    const auto a = apriori_bound(model, r, c);
    rep.add(make_entry("apriori_bound", tags::kBoundedness, k.r_T * k.r_T, a.k_T, false,
                       "Lambda_T=" + std::to_string(a.lambda_T) + " A_T=" + std::to_string(a.a_T) +
                           " B_T=" + std::to_string(a.b_T)));
  }
  if (opt.wants(tags::kDefect)) {
    const auto d = defect_summability(model, r);
    auto e = make_entry("defect_sum", tags::kDefect, d.sum, d.bound, true);
    e.pass = d.holds;
    rep.add(e);
  }
  if (opt.wants(tags::kFeasibilityL2) || opt.wants(tags::kFeasibilityCesaro) ||
      opt.wants(tags::kFeasibilityMeasure)) {
    const auto f = predictor_feasibility(model, r, opt.thresholds);
    if (opt.wants(tags::kFeasibilityL2))
      rep.add(make_entry("predictor_l2", tags::kFeasibilityL2, f.l2, f.l2_bound, true, {},
                         roundoff_slack(f.l2_bound)));
    if (opt.wants(tags::kFeasibilityCesaro))
      rep.add(make_entry("predictor_cesaro", tags::kFeasibilityCesaro, f.cesaro, f.cesaro_bound, true, {},
                         1e-12 * f.cesaro_bound));
    if (opt.wants(tags::kFeasibilityMeasure))
      for (const auto &m : f.measure)
        rep.add(make_entry("predictor_measure@" + std::to_string(m.threshold), tags::kFeasibilityMeasure, m.measure,
                           m.bound, true, {}, 1e-12 * m.bound));
  }
  if (opt.wants(tags::kLipschitz)) {
    const auto l = interpolant_lipschitz(model, r);
    auto e = make_entry("interpolant_lipschitz", tags::kLipschitz, l.slope, l.bound, true);
    e.pass = l.holds;
    rep.add(e);
  }
  if (opt.wants(tags::kNormalCone)) {
    const auto n = normal_term_check(model.c, r, opt.probes);
    std::string note = "probed steps=" + std::to_string(n.checked);
    if (n.window)
      note += " window=" + std::to_string(*n.window);
    if (!n.exact)
      note += "; informational: with eps_k > 0 the delta_k = eps_k/(2 mu_k) membership need not hold";
    auto e = make_entry("normal_term", tags::kNormalCone, n.worst_excess, 0.0, n.exact, note);
    e.pass = n.holds;
    rep.add(e);
  }
  if (opt.wants(tags::kGrowth) || opt.wants(tags::kDissipativity)) {
    SampleSpec spec = opt.samples;
    if (spec.radius <= 0.0)
      spec.radius = std::max({10.0, 2.0 * k.r_T, 2.0 * model.dissipativity.r_star});
    spec.points = r.x.size() > 64 ? std::vector<Vector>{r.x.front(), r.x.back()} : r.x;
    if (opt.wants(tags::kGrowth)) {
      const auto g = check_linear_growth(model, spec);
      auto e = make_entry("linear_growth", tags::kGrowth, -g.margin, 0.0, true,
                          "samples=" + std::to_string(g.samples) + " radius=" + std::to_string(g.radius));
      e.pass = g.holds;
      rep.add(e);
    }
    if (opt.wants(tags::kDissipativity)) {
      const auto d = check_tangent_dissipativity(model, spec);
      auto e = make_entry("tangent_dissipativity", tags::kDissipativity, -d.margin, 0.0, true,
                          d.samples == 0 ? "vacuous: no sampled point of C has ||x|| >= R*"
                                         : "samples=" + std::to_string(d.samples) + " radius=" + std::to_string(d.radius));
      e.pass = d.holds;
      rep.add(e);
    }
  }
  return rep;
}

} // namespace catchup
