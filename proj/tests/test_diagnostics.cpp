#include <catch_amalgamated.hpp>

#include <cmath>

#include "catchup/diagnostics.hpp"
#include "catchup/models.hpp"

using namespace catchup;
using Catch::Approx;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v)
    out[i++] = x;
  return out;
}

MonotoneModel onedim(double a = 1.0, double b = 2.0) { return make_onedim_model(OneDimModel{a, b}); }

MonotoneModel dry2() {
  return make_dry_friction_model(
      DryFrictionModel{Matrix::Identity(2, 2), vec({0.5, 0.3}), vec({1, 1}), vec({-1, -1}), vec({1, 1}), 1.0});
}

} // namespace

TEST_CASE("continuous energy bound examples", "[diagnostics][energy]") {
  CHECK(continuous_energy_bound(4.0, 1.0, 1.0, 0.0) == 4.0);
  CHECK(continuous_energy_bound(0.0, 1.0, 1.0, 50.0) == Approx(1.0));
  CHECK(continuous_energy_bound(0.0, 1.0, 1.0, 1.0) == Approx(1.0 - std::exp(-2.0)));
  CHECK(continuous_energy_bound(vec({1, 1}), 3.0, 0.5, 2.0) == Approx(2.0 * std::exp(-2.0) + 6.0 * (1 - std::exp(-2.0))));
  CHECK_THROWS_AS(continuous_energy_bound(1.0, 1.0, 0.0, 1.0), PreconditionError);
}

TEST_CASE("discrete energy with c = gamma", "[diagnostics][energy]") {
  const auto m = onedim();
  const auto r = run(m, vec({3}), make_schedule(UniformSteps{0.01}, ZeroError{}, 5.0));
  const auto e = check_discrete_energy(m, r, m.dissipativity.gamma);
  CHECK(e.holds);
  CHECK(e.violations == 0);
  CHECK(e.delta == Approx(0.5));
  CHECK(e.residuals.size() == 500);
  // M_T = 2 + 2 * 3 = 8, M~ = 1: C0 = 2 + 4 * 64, C1 = 4 * 64.
  CHECK(e.c0 == Approx(2.0 + 4.0 * 64.0));
  CHECK(e.c1 == Approx(256.0));
  CHECK_THROWS_AS(check_discrete_energy(m, r, 3.0 * m.dissipativity.gamma), PreconditionError);
  CHECK_THROWS_AS(check_discrete_energy(m, r, 0.0), PreconditionError);

  auto tampered = r;
  tampered.x[100] = vec({60});
  CHECK_FALSE(check_discrete_energy(m, tampered, 1.0).holds);
}

TEST_CASE("beta domination is close on a fine run", "[diagnostics][energy]") {
  const auto m = onedim();
  const auto r = run(m, vec({0}), make_schedule(UniformSteps{1e-3}, ZeroError{}, 5.0));
  const auto b = beta_domination(m, r);
  CHECK(b.max_excess <= 0.02);
  for (std::size_t k = 0; k < r.x.size(); k += 97)
    CHECK(r.x[k].squaredNorm() <= 1.0 - std::exp(-2.0 * r.times[k]) + 0.02);
}

TEST_CASE("defect sum is tight for the sticking model", "[diagnostics][defect]") {
  // b = -1 from 0: every step projects -mu back to 0, so p_k = mu and M_T = 1.
  const auto m = onedim(1, -1);
  const double mu = 0.01;
  const auto r = run(m, vec({0}), make_schedule(UniformSteps{mu}, ZeroError{}, 1.0));
  const auto d = defect_summability(m, r);
  CHECK(d.sum == Approx(100 * mu * mu));
  CHECK(d.bound == Approx(100 * mu * mu));
  CHECK(d.holds);

  const auto f = predictor_feasibility(m, r, {1e-3, 0.5});
  CHECK(f.l2 == Approx(mu * mu));
  CHECK(f.l2_bound == Approx(4.0 * mu * mu));
  CHECK(f.cesaro == Approx(mu));
  CHECK(f.cesaro_bound == Approx(mu));
  REQUIRE(f.measure.size() == 2);
  CHECK(f.measure[0].measure == Approx(1.0));
  CHECK(f.measure[0].bound == Approx(10.0));
  CHECK(f.measure[1].measure == 0.0);
  CHECK(f.holds);

  const auto l = interpolant_lipschitz(m, r);
  CHECK(l.slope == 0.0);
  CHECK(l.bound == Approx(2.0));
}

TEST_CASE("feasibility and defect bounds on random runs", "[diagnostics][property]") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const bool dry = trial % 2 == 0;
    const auto m = dry ? dry2() : onedim(rng.uniform(0.2, 3.0), rng.uniform(-2.0, 2.0));
    const Vector x0 = dry ? rng.uniform_vector(vec({-1, -1}), vec({1, 1})) : vec({rng.uniform(0.0, 4.0)});
    const double mu0 = rng.uniform(0.005, 0.1);
    RunOptions opt;
    opt.approx = ApproxPolicy::perturbed(static_cast<std::uint64_t>(trial));
    const auto r = run(m, x0, make_schedule(UniformSteps{mu0}, PowerOfStepError{1.0, 1.0}, 3.0), opt);
    INFO("trial " << trial);
    CHECK(defect_summability(m, r).holds);
    CHECK(predictor_feasibility(m, r).holds);
    CHECK(interpolant_lipschitz(m, r).holds);
    CHECK(check_discrete_energy(m, r, m.dissipativity.gamma).holds);
  }
}

TEST_CASE("normal term membership is exact when eps is zero", "[diagnostics][normal]") {
  const auto m = onedim(1, -1);
  const auto r = run(m, vec({0.3}), make_schedule(UniformSteps{0.05}, ZeroError{}, 1.0));
  const auto n = normal_term_check(m.c, r, ProbeSpec{16, 1, std::nullopt, true});
  CHECK(n.exact);
  CHECK(n.holds);
  CHECK(n.checked > 0);
}

TEST_CASE("normal term membership at eps/(2 mu) can fail when eps > 0", "[diagnostics][normal]") {
  // y = 0 lies in C; the approximate projection returns sqrt(eps), which is
  // admissible, but v = -sqrt(eps)/mu only reaches delta = eps/mu.
  const double mu = 1.0;
  const double eps = 1e-2;
  DiscreteRun r;
  r.times = {0.0, mu};
  r.x = {vec({0}), vec({0.1})};
  r.w = {vec({0})};
  r.y = {vec({0})};
  r.p = {vec({0.1})};
  r.v = {vec({-0.1})};
  r.mu = {mu};
  r.eps = {eps};
  const auto c = ConvexSet::halfline();
  REQUIRE(verify_run_invariants(r, c).ok);
  const auto n = normal_term_check(c, r, ProbeSpec{16, 1, std::nullopt, true});
  CHECK_FALSE(n.exact);
  CHECK_FALSE(n.holds);
  CHECK(n.worst_excess == Approx(eps / mu - eps / (2 * mu)));
  CHECK(in_approx_normal_cone(c, r.x[1], r.v[0], eps / mu, ProbeSpec{}).holds);
}

TEST_CASE("diagnose reports every run tag", "[diagnostics][report]") {
  const auto m = onedim(1, -1);
  const auto r = run(m, vec({2}), make_schedule(UniformSteps{0.01}, ZeroError{}, 3.0));
  const auto rep = diagnose(m, r);
  CHECK(rep.hard_pass());
  for (const auto &tag : tags::run_tags()) {
    bool found = false;
    for (const auto &e : rep.entries)
      found = found || e.tag == tag;
    INFO(tag);
    CHECK(found);
  }
  REQUIRE(rep.find("normal_term") != nullptr);
  CHECK(rep.find("normal_term")->hard);
  CHECK_FALSE(rep.find("beta_domination")->hard);
  CHECK_FALSE(rep.find("apriori_bound")->hard);

  RunOptions opt;
  opt.approx = ApproxPolicy::perturbed(2);
  const auto r2 = run(m, vec({2}), make_schedule(UniformSteps{0.01}, PowerOfStepError{1.0, 1.0}, 3.0), opt);
  const auto rep2 = diagnose(m, r2);
  CHECK(rep2.hard_pass());
  CHECK_FALSE(rep2.find("normal_term")->hard);

  DiagnosticsOptions only;
  only.tags = {tags::kDefect};
  const auto rep3 = diagnose(m, r, only);
  REQUIRE(rep3.entries.size() == 1);
  CHECK(rep3.entries[0].tag == tags::kDefect);
}

TEST_CASE("diagnose flags false hypotheses", "[diagnostics][report]") {
  auto m = onedim();
  m.growth.b = 1.0;
  const auto r = run(m, vec({0.5}), make_schedule(UniformSteps{0.05}, ZeroError{}, 1.0));
  const auto rep = diagnose(m, r);
  CHECK_FALSE(rep.hard_pass());
  REQUIRE(rep.find("linear_growth") != nullptr);
  CHECK_FALSE(rep.find("linear_growth")->pass);
  CHECK(rep.failures().size() >= 1);
}

TEST_CASE("stability contraction on a fine grid", "[diagnostics][stability]") {
  const auto m = onedim();
  const auto s = stability_experiment(m, vec({0.5}), vec({3}), make_schedule(UniformSteps{0.005}, ZeroError{}, 5.0));
  CHECK_FALSE(s.informational);
  CHECK(s.pass);
  CHECK(s.max_ratio <= 1.0 + 1e-12);
  CHECK(s.ell == -2.0);
  CHECK(s.tol_mesh == Approx(5 * 0.005 * 3 * 5));
  // Discrete contraction factor (1 - 2 mu) per step, independent of the oracle.
  CHECK(s.distance.back() == Approx(2.5 * std::pow(1 - 2 * 0.005, 1000)).epsilon(1e-9));

  const auto coarse = stability_experiment(m, vec({0.5}), vec({3}), make_schedule(UniformSteps{0.1}, ZeroError{}, 5.0));
  CHECK(coarse.informational);

  CHECK_THROWS_AS(stability_experiment(m, vec({1}), vec({1}), make_schedule(UniformSteps{0.1}, ZeroError{}, 1.0)),
                  PreconditionError);
  auto no_ell = m;
  no_ell.one_sided_lipschitz.reset();
  CHECK_THROWS_AS(stability_experiment(no_ell, vec({1}), vec({2}), make_schedule(UniformSteps{0.1}, ZeroError{}, 1.0)),
                  PreconditionError);
}

TEST_CASE("stability on the dry friction model", "[diagnostics][stability]") {
  const auto m = dry2();
  const auto s = stability_experiment(m, vec({0.8, -0.6}), vec({-0.9, 0.9}),
                                      make_schedule(UniformSteps{0.005}, ZeroError{}, 4.0));
  CHECK(s.pass);
}

TEST_CASE("local truncation against the exact flow", "[diagnostics][truncation]") {
  const OneDimModel p{1.0, -1.0};
  const auto m = make_onedim_model(p);
  const auto sched = make_schedule(UniformSteps{0.01}, ZeroError{}, 3.0);
  const auto tc = local_truncation(m, onedim_exact_reference(p, 2.0, 3.0), sched);
  CHECK(tc.holds);
  CHECK(tc.ratios.size() == 300);
  CHECK(tc.max_ratio <= tc.c_T);
  CHECK(tc.c_T == Approx(std::max(3.0 * (1.0 + 2.0 * 2.0), 1.0)));
}

TEST_CASE("local truncation on a zero field is exact", "[diagnostics][truncation]") {
  MonotoneModel zero{VectorField::affine(Matrix::Zero(2, 2), Vector::Zero(2)), RegularPart::zero(),
                     ConvexSet::ball(vec({0, 0}), 2.0), {0.0, 0.0}, {1.0, 0.0, 1.0}, 0.0, "zero", ""};
  ReferenceTrajectory ref{[](double) { return vec({1, 1}); }, 0.0, 1.0, "constant"};
  const auto tc = local_truncation(zero, ref, make_schedule(UniformSteps{0.1}, ZeroError{}, 1.0));
  CHECK(tc.max_ratio == 0.0);
  CHECK(tc.c_T == 1.0);
  CHECK(tc.holds);
}

TEST_CASE("local truncation rejects a coarse reference", "[diagnostics][truncation]") {
  const auto m = dry2();
  const auto ref = reference_solution(m, vec({0.8, -0.6}), 1.0, 0.01);
  CHECK_THROWS_AS(local_truncation(m, ref, make_schedule(UniformSteps{0.1}, ZeroError{}, 1.0)), PreconditionError);
  const auto fine = reference_solution(m, vec({0.8, -0.6}), 1.0, 0.1 / 32);
  CHECK(local_truncation(m, fine, make_schedule(UniformSteps{0.1}, ZeroError{}, 1.0)).holds);
}

TEST_CASE("corrector stability on random pairs", "[diagnostics][corrector]") {
  Rng rng(17);
  int checked = 0;
  for (const auto &m : {onedim(1, 2), onedim(1, -1), dry2()}) {
    const double ell = *m.one_sided_lipschitz;
    const double rho = m.dim() == 1 ? 3.0 : std::sqrt(2.0);
    for (int i = 0; i < 300; ++i) {
      const Vector x = m.dim() == 1 ? vec({rng.uniform(0, 3)}) : rng.uniform_vector(vec({-1, -1}), vec({1, 1}));
      const Vector xb = m.dim() == 1 ? vec({rng.uniform(0, 3)}) : rng.uniform_vector(vec({-1, -1}), vec({1, 1}));
      for (double mu : {0.1, 0.01})
        for (double eps : {0.0, 1e-4}) {
          auto sel = SelectionPolicy::minimal_norm();
          auto ap = ApproxPolicy::perturbed(static_cast<std::uint64_t>(i));
          const auto cc = corrector_stability_check(m, x, xb, mu, eps, ell, rho, sel, ap);
          REQUIRE(cc.holds);
          ++checked;
        }
    }
  }
  CHECK(checked == 3600);
  auto sel = SelectionPolicy::minimal_norm();
  auto ap = ApproxPolicy::exact();
  CHECK_THROWS_AS(corrector_stability_check(onedim(), vec({-1}), vec({1}), 0.1, 0, -2, 3, sel, ap),
                  PreconditionError);
  CHECK_THROWS_AS(corrector_stability_check(onedim(), vec({5}), vec({1}), 0.1, 0, -2, 3, sel, ap),
                  PreconditionError);
}

TEST_CASE("sup error against the exact flow", "[diagnostics]") {
  const OneDimModel p{1.0, 2.0};
  const auto m = make_onedim_model(p);
  const auto r = run(m, vec({0}), make_schedule(UniformSteps{1e-3}, ZeroError{}, 5.0));
  CHECK(sup_error(r, onedim_exact_reference(p, 0.0, 5.0)) <= 5e-3);
}
