#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catchup/core.hpp"
#include "catchup/diagnostics.hpp"
#include "catchup/geometry.hpp"
#include "catchup/io.hpp"
#include "catchup/models.hpp"
#include "catchup/operators.hpp"
#include "catchup/scheme.hpp"

namespace catchup {

enum ExitCode : int { kExitOk = 0, kExitCertificate = 1, kExitConfig = 2, kExitFailure = 3 };

// ---------------------------------------------------------------------------
// JSON readers
// ---------------------------------------------------------------------------

namespace cfg {

inline const json &at(const json &j, const char *key, const std::string &ctx) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(ctx + ": missing key '" + key + "'");
  return j.at(key);
}

inline double number(const json &j, const std::string &ctx) {
  if (j.is_number())
    return j.get<double>();
  if (j.is_null())
    return kInf;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf")
      return kInf;
    if (s == "-inf")
      return -kInf;
  }
  throw ConfigError(ctx + ": expected a number");
}

inline double number(const json &j, const char *key, double fallback, const std::string &ctx) {
  if (!j.is_object() || !j.contains(key))
    return fallback;
  return number(j.at(key), ctx + "." + key);
}

inline std::uint64_t u64(const json &j, const char *key, std::uint64_t fallback, const std::string &ctx) {
  if (!j.is_object() || !j.contains(key))
    return fallback;
  const auto &v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
    throw ConfigError(ctx + "." + key + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

/// A list of numbers; a bare number is broadcast to `broadcast` entries when given.
inline Vector vector(const json &j, const std::string &ctx, Index broadcast = -1) {
  if (j.is_number() && broadcast > 0)
    return Vector::Constant(broadcast, j.get<double>());
  if (!j.is_array() || j.empty())
    throw ConfigError(ctx + ": expected a nonempty array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Index>(i)] = number(j[i], ctx + "[" + std::to_string(i) + "]");
  return v;
}

inline Matrix matrix(const json &j, const std::string &ctx) {
  if (j.is_number())
    return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty())
    throw ConfigError(ctx + ": expected a matrix (array of rows)");
  const std::size_t rows = j.size();
  if (!j[0].is_array())
    throw ConfigError(ctx + ": expected an array of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(ctx + ": ragged matrix at row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = number(j[r][c], ctx);
  }
  return m;
}

inline std::string type_of(const json &j, const std::string &ctx) {
  const auto &t = at(j, "type", ctx);
  if (!t.is_string())
    throw ConfigError(ctx + ".type: expected a string");
  return t.get<std::string>();
}

} // namespace cfg

inline ConvexSet convex_set_from_json(const json &j, const std::string &ctx = "C") {
  const std::string type = cfg::type_of(j, ctx);
  try {
    if (type == "box") {
      Vector lower = cfg::vector(cfg::at(j, "lower", ctx), ctx + ".lower");
      Vector upper = cfg::vector(cfg::at(j, "upper", ctx), ctx + ".upper", lower.size());
      if (j.at("lower").is_number())
        lower = Vector::Constant(upper.size(), lower[0]);
      return ConvexSet::box(lower, upper);
    }
    if (type == "ball")
      return ConvexSet::ball(cfg::vector(cfg::at(j, "center", ctx), ctx + ".center"),
                             cfg::number(cfg::at(j, "radius", ctx), ctx + ".radius"));
    if (type == "halfspace")
      return ConvexSet::halfspace(cfg::vector(cfg::at(j, "normal", ctx), ctx + ".normal"),
                                  cfg::number(cfg::at(j, "offset", ctx), ctx + ".offset"));
    if (type == "nonneg_orthant") {
      const auto &d = cfg::at(j, "dim", ctx);
      if (!d.is_number_integer() || d.get<long long>() <= 0)
        throw ConfigError(ctx + ".dim: expected a positive integer");
      return ConvexSet::nonneg_orthant(d.get<Index>());
    }
    if (type == "halfline")
      return ConvexSet::halfline();
    if (type == "intersection") {
      const auto &members = cfg::at(j, "members", ctx);
      if (!members.is_array() || members.empty())
        throw ConfigError(ctx + ".members: expected a nonempty array");
      std::vector<ConvexSet> sets;
      for (std::size_t i = 0; i < members.size(); ++i)
        sets.push_back(convex_set_from_json(members[i], ctx + ".members[" + std::to_string(i) + "]"));
      const auto budget = static_cast<int>(cfg::u64(j, "budget", 20000, ctx));
      return ConvexSet::intersection(std::move(sets), budget, cfg::number(j, "declared_eps", 1e-10, ctx));
    }
  } catch (const PreconditionError &e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const DimensionError &e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  throw ConfigError(ctx + ": unknown set type '" + type + "'");
}

/// The model plus the closed-form data of the named examples when applicable.
struct ModelSpec {
  std::optional<MonotoneModel> model;
  std::optional<OneDimModel> onedim;
  std::optional<DryFrictionModel> dry_friction;
  json resolved;
};

inline ModelSpec model_from_json(const json &j) {
  const std::string ctx = "model";
  if (!j.is_object())
    throw ConfigError("model: expected an object");
  ModelSpec spec;
  std::string name;
  if (j.contains("model") && j.at("model").is_string())
    name = j.at("model").get<std::string>();
  else if (j.contains("name") && j.at("name").is_string())
    name = j.at("name").get<std::string>();
  try {
    if (name == "onedim") {
      OneDimModel p{cfg::number(j, "a", 1.0, ctx), cfg::number(j, "b", 2.0, ctx)};
      spec.model = make_onedim_model(p);
      spec.onedim = p;
      spec.resolved = {{"model", "onedim"}, {"a", p.a}, {"b", p.b}};
    } else if (name == "dry_friction") {
      DryFrictionModel p;
      p.tau = cfg::vector(cfg::at(j, "tau", ctx), ctx + ".tau");
      const Index n = p.tau.size();
      p.k = j.contains("K") ? cfg::matrix(j.at("K"), ctx + ".K") : Matrix(Matrix::Identity(n, n));
      const json &w = j.contains("mu") ? j.at("mu") : cfg::at(j, "weights", ctx);
      p.weights = cfg::vector(w, ctx + ".mu", n);
      p.lower = j.contains("lower") ? cfg::vector(j.at("lower"), ctx + ".lower", n) : Vector(Vector::Constant(n, -1.0));
      p.upper = j.contains("upper") ? cfg::vector(j.at("upper"), ctx + ".upper", n) : Vector(Vector::Constant(n, 1.0));
      p.gamma = cfg::number(j, "gamma", 1.0, ctx);
      spec.model = make_dry_friction_model(p);
      spec.dry_friction = p;
      json k = json::array();
      for (Index r = 0; r < n; ++r) {
        json row = json::array();
        for (Index c = 0; c < n; ++c)
          row.push_back(p.k(r, c));
        k.push_back(row);
      }
      spec.resolved = {{"model", "dry_friction"}, {"K", k},           {"tau", to_json(p.tau)}, {"mu", to_json(p.weights)},
                       {"lower", to_json(p.lower)}, {"upper", to_json(p.upper)}, {"gamma", p.gamma}};
    } else if (!name.empty()) {
      throw ConfigError("model: unknown model '" + name + "' (see `models list`)");
    } else {
      ConvexSet c = convex_set_from_json(cfg::at(j, "C", ctx), "model.C");
      const Index n = c.dim();
      const json &fj = cfg::at(j, "f", ctx);
      const std::string ftype = cfg::type_of(fj, "model.f");
      VectorField f = VectorField::affine(Matrix::Zero(n, n), Vector::Zero(n));
      if (ftype == "affine")
        f = VectorField::affine(cfg::matrix(cfg::at(fj, "A", "model.f"), "model.f.A"),
                                cfg::vector(cfg::at(fj, "b", "model.f"), "model.f.b", n));
      else if (ftype != "zero")
        throw ConfigError("model.f: unknown field type '" + ftype + "'");
      RegularPart g = RegularPart::zero();
      if (j.contains("G")) {
        const std::string gtype = cfg::type_of(j.at("G"), "model.G");
        if (gtype == "linear")
          g = RegularPart::linear(cfg::matrix(cfg::at(j.at("G"), "M", "model.G"), "model.G.M"));
        else if (gtype == "l1")
          g = RegularPart::separable_l1(cfg::vector(cfg::at(j.at("G"), "weights", "model.G"), "model.G.weights", n));
        else if (gtype != "zero")
          throw ConfigError("model.G: unknown regular part type '" + gtype + "'");
      }
      const json &k = cfg::at(j, "constants", ctx);
      std::optional<double> ell;
      if (k.contains("ell"))
        ell = cfg::number(k.at("ell"), "model.constants.ell");
      const std::string cctx = "model.constants";
      spec.model = MonotoneModel{std::move(f),
                                 std::move(g),
                                 std::move(c),
                                 {cfg::number(cfg::at(k, "a", cctx), cctx + ".a"), cfg::number(cfg::at(k, "b", cctx), cctx + ".b")},
                                 {cfg::number(cfg::at(k, "r_star", cctx), cctx + ".r_star"),
                                  cfg::number(cfg::at(k, "M", cctx), cctx + ".M"),
                                  cfg::number(cfg::at(k, "gamma", cctx), cctx + ".gamma")},
                                 ell,
                                 j.contains("label") ? j.at("label").get<std::string>() : std::string("custom"),
                                 ell ? "supplied by configuration" : ""};
      spec.model->validate();
      spec.resolved = j;
    }
  } catch (const PreconditionError &e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const DimensionError &e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct SelectionSpec {
  SelectionKind kind = SelectionKind::MinimalNorm;
  int sign = 0;
  std::uint64_t seed = 0;
};

struct ApproxSpec {
  ApproxKind kind = ApproxKind::Exact;
  std::uint64_t seed = 0;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> diagnostics; ///< comma-separated tags or "all"
  bool strict = false;
};

struct ExperimentConfig {
  ModelSpec model;
  std::vector<Vector> initial_points;
  double horizon = 1.0;
  StepKind steps = UniformSteps{0.01};
  ErrorRule error = ZeroError{};
  SelectionSpec selection;
  ApproxSpec approx;
  std::vector<double> levels;
  double reference_refinement = kMinReferenceRefinement;
  std::set<std::string> tags; ///< empty = all
  std::optional<double> c;
  std::optional<double> tol_mesh;
  ProbeSpec probes{16, 0, std::nullopt, true};
  std::vector<double> thresholds{1e-4, 1e-3, 1e-2};
  int corrector_pairs = 200;
  std::uint64_t seed = 0;
  bool check_equilibrium = false;
  bool strict = false;

  const MonotoneModel &monotone() const { return *model.model; }

  RunOptions run_options() const {
    RunOptions o;
    switch (selection.kind) {
    case SelectionKind::MinimalNorm:
      o.selection = SelectionPolicy::minimal_norm();
      break;
    case SelectionKind::Sign:
      o.selection = SelectionPolicy::sign(selection.sign);
      break;
    case SelectionKind::Randomized:
      o.selection = SelectionPolicy::randomized(selection.seed);
      break;
    }
    switch (approx.kind) {
    case ApproxKind::Exact:
      o.approx = ApproxPolicy::exact();
      break;
    case ApproxKind::Perturbed:
      o.approx = ApproxPolicy::perturbed(approx.seed);
      break;
    case ApproxKind::Iterative:
      o.approx = ApproxPolicy::iterative();
      break;
    }
    return o;
  }

  DiagnosticsOptions diagnostics_options() const {
    DiagnosticsOptions d;
    d.tags = tags;
    d.c = c;
    d.thresholds = thresholds;
    d.probes = probes;
    d.samples.seed = seed + 3;
    return d;
  }

  bool wants(const std::string &tag) const { return tags.empty() || tags.count(tag) > 0; }
};

inline std::set<std::string> parse_tags(const json &j) {
  std::set<std::string> out;
  auto add = [&](const std::string &s) {
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty())
        continue;
      if (item == "all")
        return false;
      out.insert(item);
    }
    return true;
  };
  if (j.is_string()) {
    if (!add(j.get<std::string>()))
      return {};
  } else if (j.is_array()) {
    for (const auto &t : j) {
      if (!t.is_string())
        throw ConfigError("diagnostics: expected strings");
      if (!add(t.get<std::string>()))
        return {};
    }
  } else {
    throw ConfigError("diagnostics: expected a string or an array of strings");
  }
  std::set<std::string> known(tags::run_tags().begin(), tags::run_tags().end());
  known.insert({tags::kContraction, tags::kTruncation, tags::kCorrector});
  for (const auto &t : out)
    if (!known.count(t))
      throw ConfigError("diagnostics: unknown tag '" + t + "'");
  return out;
}

inline ExperimentConfig load_config(const json &j, const CliOverrides &over = {}) {
  if (!j.is_object())
    throw ConfigError("config: expected a JSON object");
  ExperimentConfig c;
  c.seed = over.seed.value_or(cfg::u64(j, "seed", 0, "config"));
  c.model = model_from_json(cfg::at(j, "model", "config"));
  const MonotoneModel &m = *c.model.model;

  const json *points = nullptr;
  if (j.contains("initial_points"))
    points = &j.at("initial_points");
  if (j.contains("x0")) {
    c.initial_points.push_back(cfg::vector(j.at("x0"), "x0", m.dim()));
  } else if (!points) {
    throw ConfigError("config: missing key 'x0' (or 'initial_points')");
  }
  if (points) {
    if (!points->is_array())
      throw ConfigError("initial_points: expected an array of points");
    for (std::size_t i = 0; i < points->size(); ++i)
      c.initial_points.push_back(cfg::vector((*points)[i], "initial_points[" + std::to_string(i) + "]", m.dim()));
  }
  for (std::size_t i = 0; i < c.initial_points.size(); ++i) {
    const Vector &x0 = c.initial_points[i];
    if (x0.size() != m.dim())
      throw ConfigError("initial point " + std::to_string(i) + ": dimension " + std::to_string(x0.size()) +
                        " does not match the model dimension " + std::to_string(m.dim()));
    if (!contains(m.c, x0))
      throw ConfigError("initial point " + std::to_string(i) + " is not in C: distance " +
                        format_double(distance(m.c, x0)) + " exceeds the membership tolerance");
  }

  c.horizon = cfg::number(cfg::at(j, "horizon", "config"), "horizon");
  if (!(std::isfinite(c.horizon) && c.horizon > 0.0))
    throw ConfigError("horizon: must be positive and finite");

  if (j.contains("schedule")) {
    const json &s = j.at("schedule");
    const std::string t = cfg::type_of(s, "schedule");
    if (t == "uniform")
      c.steps = UniformSteps{cfg::number(cfg::at(s, "mu0", "schedule"), "schedule.mu0")};
    else if (t == "polynomial")
      c.steps = PolynomialSteps{cfg::number(cfg::at(s, "mu0", "schedule"), "schedule.mu0"),
                                cfg::number(s, "alpha", 1.0, "schedule")};
    else if (t == "explicit") {
      const Vector mu = cfg::vector(cfg::at(s, "mu", "schedule"), "schedule.mu");
      c.steps = ExplicitSteps{std::vector<double>(mu.data(), mu.data() + mu.size())};
    } else
      throw ConfigError("schedule: unknown type '" + t + "'");
  }
  if (j.contains("error")) {
    const json &e = j.at("error");
    const std::string t = cfg::type_of(e, "error");
    if (t == "zero")
      c.error = ZeroError{};
    else if (t == "power" || t == "power_of_step")
      c.error = PowerOfStepError{cfg::number(e, "eps0", 1.0, "error"), cfg::number(e, "beta", 1.0, "error")};
    else if (t == "explicit") {
      const Vector eps = cfg::vector(cfg::at(e, "eps", "error"), "error.eps");
      c.error = ExplicitError{std::vector<double>(eps.data(), eps.data() + eps.size())};
    } else
      throw ConfigError("error: unknown type '" + t + "'");
  }
  if (j.contains("selection")) {
    const json &s = j.at("selection");
    const std::string t = cfg::type_of(s, "selection");
    if (t == "minimal_norm")
      c.selection.kind = SelectionKind::MinimalNorm;
    else if (t == "sign") {
      c.selection.kind = SelectionKind::Sign;
      const double sg = cfg::number(s, "sign", 0.0, "selection");
      if (sg != -1.0 && sg != 0.0 && sg != 1.0)
        throw ConfigError("selection.sign: must be -1, 0 or 1");
      c.selection.sign = static_cast<int>(sg);
    } else if (t == "randomized") {
      c.selection.kind = SelectionKind::Randomized;
      c.selection.seed = cfg::u64(s, "seed", c.seed, "selection");
    } else
      throw ConfigError("selection: unknown type '" + t + "'");
  }
  if (j.contains("projection")) {
    const json &p = j.at("projection");
    const std::string t = cfg::type_of(p, "projection");
    if (t == "exact")
      c.approx.kind = ApproxKind::Exact;
    else if (t == "perturbed") {
      c.approx.kind = ApproxKind::Perturbed;
      c.approx.seed = cfg::u64(p, "seed", c.seed + 1, "projection");
    } else if (t == "iterative")
      c.approx.kind = ApproxKind::Iterative;
    else
      throw ConfigError("projection: unknown type '" + t + "'");
  }
  if (j.contains("study")) {
    const json &s = j.at("study");
    if (s.contains("levels")) {
      const Vector lv = cfg::vector(s.at("levels"), "study.levels");
      c.levels.assign(lv.data(), lv.data() + lv.size());
    } else {
      const double mu0 = cfg::number(cfg::at(s, "mu0", "study"), "study.mu0");
      const auto count = cfg::u64(s, "count", 4, "study");
      for (std::uint64_t l = 0; l < count; ++l)
        c.levels.push_back(mu0 / std::pow(2.0, static_cast<double>(l)));
    }
    c.reference_refinement = cfg::number(s, "reference_refinement", kMinReferenceRefinement, "study");
    if (c.reference_refinement < kMinReferenceRefinement)
      throw ConfigError("study.reference_refinement: must be at least 32");
  }
  if (over.diagnostics)
    c.tags = parse_tags(json(*over.diagnostics));
  else if (j.contains("diagnostics"))
    c.tags = parse_tags(j.at("diagnostics"));
  if (j.contains("c"))
    c.c = cfg::number(j.at("c"), "c");
  if (j.contains("tol_mesh"))
    c.tol_mesh = cfg::number(j.at("tol_mesh"), "tol_mesh");
  if (j.contains("probes")) {
    const json &p = j.at("probes");
    c.probes.random = static_cast<int>(cfg::u64(p, "random", 16, "probes"));
    c.probes.extremes = p.value("extremes", true);
    if (p.contains("window"))
      c.probes.window = cfg::number(p.at("window"), "probes.window");
  }
  c.probes.seed = c.seed + 2;
  if (j.contains("thresholds")) {
    const Vector th = cfg::vector(j.at("thresholds"), "thresholds");
    c.thresholds.assign(th.data(), th.data() + th.size());
  }
  c.corrector_pairs = static_cast<int>(cfg::u64(j, "corrector_pairs", 200, "config"));
  c.check_equilibrium = j.value("check_equilibrium", false);
  c.strict = over.strict || j.value("strict", false);
  return c;
}

inline json load_json_file(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(is, nullptr, true, true);
  } catch (const json::exception &e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Manifest pieces
// ---------------------------------------------------------------------------

inline json model_constants_json(const MonotoneModel &m) {
  return json{{"name", m.name},
              {"dim", m.dim()},
              {"set", m.c.kind()},
              {"regular_part", m.g.kind()},
              {"growth", {{"a", m.growth.a}, {"b", m.growth.b}}},
              {"dissipativity",
               {{"r_star", m.dissipativity.r_star}, {"M", m.dissipativity.m}, {"gamma", m.dissipativity.gamma}}},
              {"m_tilde", m.m_tilde()},
              {"ell", m.one_sided_lipschitz ? json(*m.one_sided_lipschitz) : json(nullptr)},
              {"ell_note", m.lipschitz_note}};
}

inline json settings_json(const ExperimentConfig &c) {
  json tag_list = json::array();
  for (const auto &t : c.tags)
    tag_list.push_back(t);
  if (c.tags.empty())
    tag_list.push_back("all");
  const double gamma = c.monotone().dissipativity.gamma;
  const double energy_c = c.c.value_or(gamma);
  json pts = json::array();
  for (const auto &p : c.initial_points)
    pts.push_back(to_json(p));
  RunOptions o = c.run_options();
  return json{{"model", c.model.resolved},
              {"initial_points", pts},
              {"horizon", c.horizon},
              {"seed", c.seed},
              {"selection", {{"type", o.selection.name()}, {"sign", c.selection.sign}, {"seed", c.selection.seed}}},
              {"projection", {{"type", o.approx.name()}, {"seed", c.approx.seed}}},
              {"diagnostics", tag_list},
              {"energy_c", energy_c},
              {"young_split", {{"delta", (2.0 * gamma - energy_c) / 2.0}, {"eta", (2.0 * gamma - energy_c) / 2.0}}},
              {"membership_tolerance", "1e-9 * (1 + |x|)"},
              {"probes",
               {{"random", c.probes.random},
                {"extremes", c.probes.extremes},
                {"seed", c.probes.seed},
                {"window", c.probes.window ? json(*c.probes.window) : json("10 * (1 + |x|)")}}},
              {"thresholds", c.thresholds},
              {"tol_mesh", c.tol_mesh ? json(*c.tol_mesh) : json("5 * mesh * (1 + |ell|) * T")},
              {"reference_refinement", c.reference_refinement},
              {"corrector_pairs", c.corrector_pairs},
              {"strict", c.strict}};
}

// ---------------------------------------------------------------------------
// Extra run-level certificates
// ---------------------------------------------------------------------------

inline ReferenceTrajectory reference_for(const ExperimentConfig &c, const Vector &x0, double horizon, double coarse_mesh) {
  if (c.model.onedim)
    return onedim_exact_reference(*c.model.onedim, x0[0], horizon);
  return reference_solution(c.monotone(), x0, horizon, coarse_mesh / c.reference_refinement);
}

inline void add_truncation_entry(DiagnosticsReport &rep, const ExperimentConfig &c, const StepSchedule &s) {
  const double min_mu = *std::min_element(s.mu.begin(), s.mu.end());
  // One extra reference cell so that a uniform fine grid covers the coarse final time.
  const auto ref = reference_for(c, c.initial_points.front(), s.final_time() + min_mu / c.reference_refinement, min_mu);
  const auto tc = local_truncation(c.monotone(), ref, s, c.run_options());
  rep.add(make_entry("local_truncation", tags::kTruncation, tc.max_ratio, tc.c_T, true,
                     "reference=" + ref.source + " M_T=" + format_double(tc.m_T)));
}

inline void add_corrector_entry(DiagnosticsReport &rep, const ExperimentConfig &c, const DiscreteRun &r) {
  const MonotoneModel &m = c.monotone();
  if (!m.one_sided_lipschitz) {
    auto e = make_entry("corrector_stability", tags::kCorrector, 0.0, 0.0, false, "skipped: no one-sided Lipschitz constant");
    rep.add(e);
    return;
  }
  const double rho = std::max(1.0, r.max_norm());
  SampleSpec spec{2 * c.corrector_pairs, rho, 0.0, c.seed + 4, {}};
  const auto xs = sample_constraint_points(m.c, spec);
  const double mu = r.mesh();
  double eps = 0.0;
  for (double e : r.eps)
    eps = std::max(eps, e);
  RunOptions o = c.run_options();
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    const auto cc =
        corrector_stability_check(m, xs[i], xs[i + 1], mu, eps, *m.one_sided_lipschitz, rho, o.selection, o.approx);
    worst = std::max(worst, cc.lhs / cc.rhs);
  }
  rep.add(make_entry("corrector_stability", tags::kCorrector, worst, 1.0, true,
                     "max lhs/rhs over " + std::to_string(xs.size() / 2) + " pairs, rho=" + format_double(rho)));
}

inline void add_equilibrium_entry(DiagnosticsReport &rep, const MonotoneModel &m, const DiscreteRun &r) {
  const Vector &x = r.x.back();
  double wmax = 0.0;
  for (const auto &w : r.w)
    wmax = std::max(wmax, w.norm());
  const double tol = r.mu.back() * wmax;
  const auto eq = verify_equilibrium(m, x, tol);
  rep.add(make_entry("equilibrium", "equilibrium.inclusion", eq.gap, eq.tolerance, true,
                     "snap tolerance " + format_double(tol)));
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommandResult {
  int exit_code = kExitOk;
  std::string message;
};

namespace detail {

inline std::filesystem::path prepare_out(const std::string &out) {
  std::filesystem::path p(out.empty() ? "." : out);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_failure_manifest(const std::string &out, const std::string &command, int code,
                                   const std::string &message) {
  try {
    const auto dir = prepare_out(out);
    write_json((dir / "manifest.json").string(),
               json{{"command", command}, {"status", "failed"}, {"exit_code", code}, {"message", message}});
  } catch (...) {
    // The failure is still reported on stderr and through the exit code.
  }
}

template <class Fn>
CommandResult guarded(const std::string &command, const std::string &out, std::ostream &err, Fn &&fn) {
  CommandResult res;
  try {
    res = fn();
  } catch (const ConfigError &e) {
    res = {kExitConfig, e.what()};
  } catch (const PreconditionError &e) {
    res = {kExitConfig, e.what()};
  } catch (const DimensionError &e) {
    res = {kExitConfig, e.what()};
  } catch (const json::exception &e) {
    res = {kExitConfig, std::string("config: ") + e.what()};
  } catch (const std::exception &e) {
    res = {kExitFailure, e.what()};
  }
  if (res.exit_code == kExitConfig || res.exit_code == kExitFailure) {
    err << command << ": " << res.message << '\n';
    write_failure_manifest(out, command, res.exit_code, res.message);
  }
  return res;
}

inline DiagnosticsReport full_report(const ExperimentConfig &c, const DiscreteRun &r) {
  DiagnosticsReport rep = diagnose(c.monotone(), r, c.diagnostics_options());
  if (r.complete && r.schedule) {
    if (c.wants(tags::kTruncation))
      add_truncation_entry(rep, c, *r.schedule);
    if (c.wants(tags::kCorrector))
      add_corrector_entry(rep, c, r);
  }
  if (c.check_equilibrium && r.complete)
    add_equilibrium_entry(rep, c.monotone(), r);
  return rep;
}

inline double fitted_order(const std::vector<double> &mesh, const std::vector<double> &err) {
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    if (err[i] > 0.0 && mesh[i] > 0.0) {
      lx.push_back(std::log(mesh[i]));
      ly.push_back(std::log(err[i]));
    }
  }
  if (lx.size() < 2)
    return std::nan("");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(lx.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

} // namespace detail

inline CommandResult cmd_run(const json &config, const std::string &out, const CliOverrides &over,
                             std::ostream &os = std::cout, std::ostream &err = std::cerr) {
  return detail::guarded("run", out, err, [&]() -> CommandResult {
    const ExperimentConfig c = load_config(config, over);
    const auto schedule = make_schedule(c.steps, c.error, c.horizon);
    const auto dir = detail::prepare_out(out);
    const DiscreteRun r = run(c.monotone(), c.initial_points.front(), schedule, c.run_options());
    write_trajectory_csv((dir / "trajectory.csv").string(), r);
    const DiagnosticsReport rep = detail::full_report(c, r);
    write_json((dir / "diagnostics.json").string(), to_json(rep));

    CommandResult res;
    if (!r.complete)
      res = {kExitFailure, "run aborted: " + r.failure};
    else if (!rep.hard_pass())
      res = {kExitCertificate, "certificate failure: " + rep.failures().front()->name};
    else
      res = {kExitOk, "ok"};

    json warnings = json::array();
    for (const auto &w : schedule.warnings)
      warnings.push_back(w);
    write_json((dir / "manifest.json").string(),
               json{{"command", "run"},
                    {"status", res.exit_code == kExitOk ? "ok" : "failed"},
                    {"exit_code", res.exit_code},
                    {"message", res.message},
                    {"settings", settings_json(c)},
                    {"model_constants", model_constants_json(c.monotone())},
                    {"schedule", to_json(schedule)},
                    {"warnings", warnings},
                    {"final_state", to_json(r.x.back())},
                    {"final_time", r.final_time()},
                    {"steps", r.steps()},
                    {"outputs", {"trajectory.csv", "diagnostics.json", "manifest.json"}}});

    os << to_text(rep);
    for (const auto &w : schedule.warnings)
      os << "warning: " << w << '\n';
    os << "final t=" << format_double(r.final_time()) << " x=";
    for (Index i = 0; i < r.dim(); ++i)
      os << (i ? "," : "") << format_double(r.x.back()[i]);
    os << '\n';
    return res;
  });
}

struct StudyLevel {
  double mesh = 0.0;
  Index steps = 0;
  double sup_error = 0.0;
  double feas_l2 = 0.0;
  double feas_l2_bound = 0.0;
  double defect_sum = 0.0;
  double defect_bound = 0.0;
  double energy_worst = 0.0;
  bool hard_pass = false;
  DiagnosticsReport report;
};

struct StudyResult {
  std::vector<StudyLevel> levels;
  double order = 0.0;
  bool monotone = true;
  bool feasibility_dominated = true;
  std::string reference;
};

inline StudyResult run_study(const ExperimentConfig &c) {
  if (c.levels.size() < 3)
    throw ConfigError("study: at least 3 refinement levels are required, got " + std::to_string(c.levels.size()));
  for (std::size_t i = 0; i < c.levels.size(); ++i) {
    if (!(c.levels[i] > 0.0))
      throw ConfigError("study: levels must be positive");
    if (i > 0 && !(c.levels[i] < c.levels[i - 1]))
      throw ConfigError("study: levels must strictly refine");
  }
  if (std::holds_alternative<ExplicitSteps>(c.steps))
    throw ConfigError("study: explicit step lists cannot be refined");
  if (std::holds_alternative<ExplicitError>(c.error))
    throw ConfigError("study: explicit tolerance lists cannot be refined");

  const Vector &x0 = c.initial_points.front();
  const auto ref = reference_for(c, x0, c.horizon, c.levels.back());
  StudyResult study;
  study.reference = ref.source;

  std::vector<std::future<StudyLevel>> futures;
  for (double mu : c.levels) {
    futures.push_back(std::async(std::launch::async, [&c, &ref, &x0, mu]() {
      StepKind kind = c.steps;
      if (auto *p = std::get_if<PolynomialSteps>(&kind))
        p->mu0 = mu;
      else
        kind = UniformSteps{mu};
      const auto schedule = make_schedule(kind, c.error, c.horizon);
      const DiscreteRun r = run(c.monotone(), x0, schedule, c.run_options());
      if (!r.complete)
        throw GeometryError("study level mu=" + format_double(mu) + ": " + r.failure);
      StudyLevel lv;
      lv.mesh = schedule.mu_max;
      lv.steps = r.steps();
      lv.sup_error = sup_error(r, ref);
      const auto f = predictor_feasibility(c.monotone(), r, c.thresholds);
      lv.feas_l2 = f.l2;
      lv.feas_l2_bound = f.l2_bound;
      const auto d = defect_summability(c.monotone(), r);
      lv.defect_sum = d.sum;
      lv.defect_bound = d.bound;
      lv.energy_worst =
          check_discrete_energy(c.monotone(), r, c.c.value_or(c.monotone().dissipativity.gamma)).worst_residual;
      lv.report = diagnose(c.monotone(), r, c.diagnostics_options());
      lv.hard_pass = lv.report.hard_pass();
      return lv;
    }));
  }
  for (auto &f : futures)
    study.levels.push_back(f.get());

  std::vector<double> mesh;
  std::vector<double> err;
  for (std::size_t i = 0; i < study.levels.size(); ++i) {
    const auto &lv = study.levels[i];
    mesh.push_back(lv.mesh);
    err.push_back(lv.sup_error);
    if (i > 0 && lv.sup_error > 1.1 * study.levels[i - 1].sup_error)
      study.monotone = false;
    if (lv.feas_l2 > lv.feas_l2_bound + roundoff_slack(lv.feas_l2_bound))
      study.feasibility_dominated = false;
  }
  study.order = detail::fitted_order(mesh, err);
  return study;
}

inline CommandResult cmd_study(const json &config, const std::string &out, const CliOverrides &over,
                               std::ostream &os = std::cout, std::ostream &err = std::cerr) {
  return detail::guarded("study", out, err, [&]() -> CommandResult {
    const ExperimentConfig c = load_config(config, over);
    const auto dir = detail::prepare_out(out);
    const StudyResult s = run_study(c);

    std::ofstream csv(dir / "study.csv");
    csv << "level,mesh,steps,sup_error,feas_l2,feas_l2_bound,defect_sum,defect_bound,energy_worst_residual,hard_pass\n";
    json levels = json::array();
    bool all_pass = true;
    for (std::size_t i = 0; i < s.levels.size(); ++i) {
      const auto &lv = s.levels[i];
      csv << i << ',' << format_double(lv.mesh) << ',' << lv.steps << ',' << format_double(lv.sup_error) << ','
          << format_double(lv.feas_l2) << ',' << format_double(lv.feas_l2_bound) << ',' << format_double(lv.defect_sum)
          << ',' << format_double(lv.defect_bound) << ',' << format_double(lv.energy_worst) << ','
          << (lv.hard_pass ? 1 : 0) << '\n';
      levels.push_back(json{{"mesh", lv.mesh}, {"report", to_json(lv.report)}});
      all_pass = all_pass && lv.hard_pass;
    }
    csv.close();

    CommandResult res{kExitOk, "ok"};
    if (!all_pass)
      res = {kExitCertificate, "certificate failure at one or more levels"};
    else if (!s.monotone)
      res = {kExitCertificate, "sup errors do not decrease across levels (10% slack)"};
    else if (!s.feasibility_dominated)
      res = {kExitCertificate, "predictor L2 exceeds its bound"};

    json study = {{"order", number_or_null(s.order)},
                  {"monotone", s.monotone},
                  {"feasibility_dominated", s.feasibility_dominated},
                  {"reference", s.reference}};
    write_json((dir / "diagnostics.json").string(), json{{"study", study}, {"levels", levels}});
    write_json((dir / "manifest.json").string(),
               json{{"command", "study"},
                    {"status", res.exit_code == kExitOk ? "ok" : "failed"},
                    {"exit_code", res.exit_code},
                    {"message", res.message},
                    {"settings", settings_json(c)},
                    {"model_constants", model_constants_json(c.monotone())},
                    {"levels", c.levels},
                    {"study", study},
                    {"outputs", {"study.csv", "diagnostics.json", "manifest.json"}}});

    os << "level  mesh          sup_error     feas_l2       feas_l2_bound  pass\n";
    for (std::size_t i = 0; i < s.levels.size(); ++i) {
      const auto &lv = s.levels[i];
      os << std::setw(5) << i << "  " << std::setw(12) << format_double(lv.mesh) << "  " << std::setw(12)
         << std::scientific << std::setprecision(5) << lv.sup_error << "  " << lv.feas_l2 << "  " << lv.feas_l2_bound
         << "   " << (lv.hard_pass ? "yes" : "no") << std::defaultfloat << '\n';
    }
    os << "empirical order " << format_double(s.order) << " (reference: " << s.reference << ")\n";
    return res;
  });
}

inline CommandResult cmd_stability(const json &config, const std::string &out, const CliOverrides &over,
                                   std::ostream &os = std::cout, std::ostream &err = std::cerr) {
  return detail::guarded("stability", out, err, [&]() -> CommandResult {
    const ExperimentConfig c = load_config(config, over);
    if (c.initial_points.size() < 2)
      throw ConfigError("stability: two initial points are required");
    if ((c.initial_points[0] - c.initial_points[1]).norm() == 0.0)
      throw ConfigError("stability: initial points coincide");
    const auto schedule = make_schedule(c.steps, c.error, c.horizon);
    const auto dir = detail::prepare_out(out);
    const auto prof =
        stability_experiment(c.monotone(), c.initial_points[0], c.initial_points[1], schedule, c.run_options(), c.tol_mesh);

    std::ofstream csv(dir / "stability.csv");
    csv << "k,t,distance,ratio,envelope\n";
    const double d0 = (c.initial_points[0] - c.initial_points[1]).norm();
    for (std::size_t k = 0; k < prof.times.size(); ++k)
      csv << k << ',' << format_double(prof.times[k]) << ',' << format_double(prof.distance[k]) << ','
          << format_double(prof.ratio[k]) << ',' << format_double(std::exp(prof.ell * prof.times[k]) * d0) << '\n';
    csv.close();
    write_trajectory_csv((dir / "trajectory_1.csv").string(), prof.first);
    write_trajectory_csv((dir / "trajectory_2.csv").string(), prof.second);

    DiagnosticsReport rep;
    std::string note = "tol_mesh=" + format_double(prof.tol_mesh) + " ell=" + format_double(prof.ell);
    if (!prof.note.empty())
      note += " (" + prof.note + ")";
    if (prof.informational)
      note += "; informational: mesh * (1 + |ell|) > 0.1";
    const bool hard = !prof.informational || c.strict;
    rep.add(make_entry("contraction", tags::kContraction, prof.max_ratio, 1.0 + prof.tol_mesh, hard, note));

    CommandResult res{kExitOk, prof.pass ? "ok" : (hard ? "contraction bound exceeded" : "informational: contraction bound exceeded on a coarse mesh")};
    if (!rep.hard_pass())
      res.exit_code = kExitCertificate;
    write_json((dir / "diagnostics.json").string(), to_json(rep));
    write_json((dir / "manifest.json").string(),
               json{{"command", "stability"},
                    {"status", res.exit_code == kExitOk ? "ok" : "failed"},
                    {"exit_code", res.exit_code},
                    {"message", res.message},
                    {"informational", prof.informational},
                    {"settings", settings_json(c)},
                    {"model_constants", model_constants_json(c.monotone())},
                    {"schedule", to_json(schedule)},
                    {"max_ratio", prof.max_ratio},
                    {"tol_mesh", prof.tol_mesh},
                    {"outputs", {"stability.csv", "trajectory_1.csv", "trajectory_2.csv", "diagnostics.json", "manifest.json"}}});
    os << to_text(rep);
    return res;
  });
}

inline void cmd_models_list(std::ostream &os = std::cout) {
  for (const auto &m : list_models())
    os << m.name << "  " << m.description << '\n';
}

} // namespace catchup
