#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "catchup/experiment.hpp"

using namespace catchup;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("catchup_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json onedim_config(double b = 2.0) {
  return json{{"model", {{"model", "onedim"}, {"a", 1.0}, {"b", b}}},
              {"x0", {3.0}},
              {"horizon", 2.0},
              {"schedule", {{"type", "uniform"}, {"mu0", 0.01}}}};
}

json dry_config() {
  return json{{"model",
               {{"model", "dry_friction"},
                {"K", {{1.0, 0.0}, {0.0, 1.0}}},
                {"tau", {0.5, 0.3}},
                {"mu", {1.0, 1.0}},
                {"lower", {-1.0, -1.0}},
                {"upper", {1.0, 1.0}}}},
              {"x0", {0.8, -0.6}},
              {"horizon", 3.0},
              {"seed", 42},
              {"schedule", {{"type", "uniform"}, {"mu0", 0.02}}},
              {"error", {{"type", "power_of_step"}, {"eps0", 1.0}, {"beta", 1.0}}},
              {"selection", {{"type", "randomized"}}},
              {"projection", {{"type", "perturbed"}}}};
}

struct Captured {
  CommandResult res;
  std::string out;
  std::string err;
};

template <class Cmd>
Captured call(Cmd cmd, const json &config, const fs::path &dir, CliOverrides over = {}) {
  std::ostringstream os;
  std::ostringstream es;
  Captured c;
  c.res = cmd(config, dir.string(), over, os, es);
  c.out = os.str();
  c.err = es.str();
  return c;
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string(CATCHUP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("double formatting round-trips", "[io]") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
    REQUIRE(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(kInf) == "inf");
  CHECK(std::isnan(parse_double("nan")));
  CHECK_THROWS_AS(parse_double("1.5x"), ConfigError);
  CHECK(number_or_null(kInf).is_null());
}

TEST_CASE("trajectory csv round-trip", "[io]") {
  const auto c = load_config(dry_config());
  const auto s = make_schedule(c.steps, c.error, c.horizon);
  const auto r = run(c.monotone(), c.initial_points.front(), s, c.run_options());
  std::stringstream ss;
  write_trajectory_csv(ss, r);
  const auto back = read_trajectory_csv(ss);
  REQUIRE(back.x.size() == r.x.size());
  for (std::size_t k = 0; k < r.x.size(); ++k) {
    REQUIRE(back.x[k] == r.x[k]);
    REQUIRE(back.times[k] == r.times[k]);
  }
  for (std::size_t k = 0; k < r.mu.size(); ++k) {
    REQUIRE(back.w[k] == r.w[k]);
    REQUIRE(back.p[k] == r.p[k]);
    REQUIRE(back.v[k] == r.v[k]);
    REQUIRE(back.eps[k] == r.eps[k]);
    REQUIRE((back.y[k] - r.y[k]).norm() <= 1e-15 * (1.0 + r.y[k].norm()));
  }
  CHECK(verify_run_invariants(back, c.monotone().c).ok);
  DiagnosticsOptions opt;
  opt.tags = {tags::kDefect, tags::kEnergyDiscrete, tags::kLipschitz, tags::kFeasibilityL2};
  const auto a = diagnose(c.monotone(), r, opt);
  const auto b = diagnose(c.monotone(), back, opt);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].measured == b.entries[i].measured);
    CHECK(a.entries[i].pass == b.entries[i].pass);
  }
}

TEST_CASE("malformed trajectory csv is rejected", "[io]") {
  std::stringstream empty;
  CHECK_THROWS_AS(read_trajectory_csv(empty), ConfigError);
  std::stringstream header("a,b,c\n");
  CHECK_THROWS_AS(read_trajectory_csv(header), ConfigError);
  std::stringstream no_final("k,t,x0,w0,p0,v0,mu,eps\n0,0,1,0,0,0,0.1,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(no_final), ConfigError);
  std::stringstream bad_number("k,t,x0,w0,p0,v0,mu,eps\n0,0,abc,,,,,\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad_number), ConfigError);
}

TEST_CASE("report json carries certificate tags", "[io]") {
  DiagnosticsReport rep;
  rep.add(make_entry("x", "energy.discrete", 1.0, kInf, true));
  const json j = to_json(rep);
  CHECK(j["entries"][0]["theorem_tag"] == "energy.discrete");
  CHECK(j["entries"][0]["bound"].is_null());
  CHECK(j["hard_pass"] == true);
  CHECK(to_text(rep).find("pass") != std::string::npos);
}

TEST_CASE("config errors map to exit code 2", "[cli]") {
  const auto dir = scratch("config_errors");
  auto missing = onedim_config();
  missing.erase("horizon");
  auto r = call(cmd_run, missing, dir);
  CHECK(r.res.exit_code == kExitConfig);
  CHECK(r.err.find("horizon") != std::string::npos);
  CHECK(json::parse(slurp(dir / "manifest.json"))["exit_code"] == 2);

  auto unknown = onedim_config();
  unknown["model"]["model"] = "pendulum";
  CHECK(call(cmd_run, unknown, dir).res.exit_code == kExitConfig);

  auto bad_set = json{{"model",
                       {{"C", {{"type", "torus"}}},
                        {"f", {{"type", "zero"}}},
                        {"constants", {{"a", 0}, {"b", 0}, {"r_star", 1}, {"M", 0}, {"gamma", 1}}}}},
                      {"x0", {0.0}},
                      {"horizon", 1.0}};
  CHECK(call(cmd_run, bad_set, dir).res.exit_code == kExitConfig);

  auto alpha = onedim_config();
  alpha["schedule"] = {{"type", "polynomial"}, {"mu0", 0.1}, {"alpha", 2.0}};
  CHECK(call(cmd_run, alpha, dir).res.exit_code == kExitConfig);

  auto tag = onedim_config();
  tag["diagnostics"] = "energy.discrete,nonsense";
  CHECK(call(cmd_run, tag, dir).res.exit_code == kExitConfig);

  auto dim = onedim_config();
  dim["x0"] = {1.0, 2.0};
  CHECK(call(cmd_run, dim, dir).res.exit_code == kExitConfig);
}

TEST_CASE("an initial point outside C is rejected", "[cli]") {
  const auto dir = scratch("outside");
  auto c = onedim_config();
  c["x0"] = {-0.25};
  const auto r = call(cmd_run, c, dir);
  CHECK(r.res.exit_code == kExitConfig);
  CHECK(r.err.find("distance 0.25") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "trajectory.csv"));
}

TEST_CASE("run writes artifacts and warns on non-decaying tolerances", "[cli]") {
  const auto dir = scratch("warn");
  auto c = onedim_config(-1.0);
  c["schedule"] = {{"type", "uniform"}, {"mu0", 0.1}};
  c["error"] = {{"type", "explicit"}, {"eps", std::vector<double>(20, 0.01)}};
  c["projection"] = {{"type", "perturbed"}, {"seed", 3}};
  const auto r = call(cmd_run, c, dir);
  CHECK(r.res.exit_code == kExitOk);
  CHECK(r.out.find("warning") != std::string::npos);
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["warnings"].size() == 1);
  CHECK(manifest["schedule"]["steps"] == 20);
  CHECK(fs::exists(dir / "trajectory.csv"));
  const json diag = json::parse(slurp(dir / "diagnostics.json"));
  CHECK(diag["hard_pass"] == true);
  bool normal_info = false;
  for (const auto &e : diag["entries"])
    if (e["name"] == "normal_term")
      normal_info = e["hard"] == false;
  CHECK(normal_info);
}

TEST_CASE("false constants give a certificate failure", "[cli]") {
  const auto dir = scratch("cert");
  const json c{{"model",
                {{"C", {{"type", "halfline"}}},
                 {"f", {{"type", "affine"}, {"A", {{-1.0}}}, {"b", {5.0}}}},
                 {"constants", {{"a", 0.1}, {"b", 0.1}, {"r_star", 1}, {"M", 0.1}, {"gamma", 1}}}}},
               {"x0", {0.0}},
               {"horizon", 1.0}};
  const auto r = call(cmd_run, c, dir);
  CHECK(r.res.exit_code == kExitCertificate);
  CHECK(json::parse(slurp(dir / "manifest.json"))["status"] == "failed");
}

TEST_CASE("an uncertified projection aborts with exit code 3", "[cli]") {
  const auto dir = scratch("abort");
  const json c{{"model",
                {{"C",
                  {{"type", "intersection"},
                   {"budget", 1},
                   {"members",
                    {{{"type", "ball"}, {"center", {0.0, 0.0}}, {"radius", 1.0}},
                     {{"type", "ball"}, {"center", {1.5, 0.0}}, {"radius", 1.0}}}}}},
                 {"f", {{"type", "affine"}, {"A", {{0.0, 0.0}, {0.0, 0.0}}}, {"b", {0.3, 4.0}}}},
                 {"constants", {{"a", 4.1}, {"b", 0}, {"r_star", 1}, {"M", 5}, {"gamma", 1}}}}},
               {"x0", {0.75, 0.0}},
               {"horizon", 1.0},
               {"schedule", {{"type", "uniform"}, {"mu0", 0.1}}}};
  const auto r = call(cmd_run, c, dir);
  CHECK(r.res.exit_code == kExitFailure);
  CHECK(fs::exists(dir / "trajectory.csv"));
}

TEST_CASE("study needs at least three levels", "[cli]") {
  const auto dir = scratch("study");
  auto c = onedim_config();
  c["study"] = {{"levels", {0.01}}};
  CHECK(call(cmd_study, c, dir).res.exit_code == kExitConfig);
  c["study"] = {{"levels", {0.01, 0.02, 0.005}}};
  CHECK(call(cmd_study, c, dir).res.exit_code == kExitConfig);
  c["study"] = {{"levels", {0.04, 0.02, 0.01}}};
  const auto ok = call(cmd_study, c, dir);
  CHECK(ok.res.exit_code == kExitOk);
  CHECK(fs::exists(dir / "study.csv"));
  const json diag = json::parse(slurp(dir / "diagnostics.json"));
  CHECK(diag["study"]["reference"] == "exact_flow");
  CHECK(diag["study"]["order"].get<double>() > 0.5);
}

TEST_CASE("stability command", "[cli]") {
  const auto dir = scratch("stability");
  auto same = onedim_config();
  same.erase("x0");
  same["initial_points"] = {{1.0}, {1.0}};
  CHECK(call(cmd_stability, same, dir).res.exit_code == kExitConfig);
  auto one = onedim_config();
  CHECK(call(cmd_stability, one, dir).res.exit_code == kExitConfig);

  auto fine = onedim_config();
  fine.erase("x0");
  fine["initial_points"] = {{0.5}, {3.0}};
  fine["schedule"] = {{"type", "uniform"}, {"mu0", 0.005}};
  const auto ok = call(cmd_stability, fine, dir);
  CHECK(ok.res.exit_code == kExitOk);
  CHECK(fs::exists(dir / "stability.csv"));
  CHECK(json::parse(slurp(dir / "manifest.json"))["informational"] == false);

  // A stiff spring on a coarse grid: the two runs bounce between the walls.
  const json stiff{{"model",
                    {{"model", "dry_friction"},
                     {"K", {{30.0}}},
                     {"tau", {0.0}},
                     {"mu", {0.01}},
                     {"lower", {-1.0}},
                     {"upper", {1.0}}}},
                   {"initial_points", {{0.5}, {-0.5}}},
                   {"horizon", 1.0},
                   {"schedule", {{"type", "uniform"}, {"mu0", 0.1}}}};
  const auto coarse = call(cmd_stability, stiff, dir);
  CHECK(coarse.res.exit_code == kExitOk);
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["informational"] == true);
  CHECK(manifest["max_ratio"].get<double>() > 1.0 + manifest["tol_mesh"].get<double>());
  CliOverrides strict;
  strict.strict = true;
  CHECK(call(cmd_stability, stiff, dir, strict).res.exit_code == kExitCertificate);
}

TEST_CASE("runs are deterministic for a fixed seed", "[cli]") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const auto c = scratch("det_c");
  REQUIRE(call(cmd_run, dry_config(), a).res.exit_code == kExitOk);
  REQUIRE(call(cmd_run, dry_config(), b).res.exit_code == kExitOk);
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(slurp(a / "diagnostics.json") == slurp(b / "diagnostics.json"));
  CliOverrides other;
  other.seed = 43;
  REQUIRE(call(cmd_run, dry_config(), c, other).res.exit_code == kExitOk);
  CHECK(slurp(a / "trajectory.csv") != slurp(c / "trajectory.csv"));
}

TEST_CASE("command line entry point", "[cli]") {
  const auto dir = scratch("binary");
  {
    std::ofstream os(dir / "config.json");
    os << "// comments are allowed\n" << dry_config().dump(2);
  }
  const std::string cfg = (dir / "config.json").string();
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("run " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("models list") == 0);
  CHECK(run_cli("run " + cfg + " --out " + (dir / "r1").string()) == 0);
  CHECK(run_cli("run " + cfg + " --out " + (dir / "r2").string()) == 0);
  CHECK(slurp(dir / "r1" / "trajectory.csv") == slurp(dir / "r2" / "trajectory.csv"));
  CHECK(run_cli("run " + cfg + " --diagnostics bogus --out " + (dir / "r3").string()) == 2);
  CHECK(run_cli("run " + cfg + " --diagnostics energy.discrete,defect.summability --out " + (dir / "r4").string()) ==
        0);
  CHECK(json::parse(slurp(dir / "r4" / "diagnostics.json"))["entries"].size() == 2);

  std::ostringstream os;
  cmd_models_list(os);
  CHECK(os.str().find("onedim") != std::string::npos);
  CHECK(os.str().find("dry_friction") != std::string::npos);
}
