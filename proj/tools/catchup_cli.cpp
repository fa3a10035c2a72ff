#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "catchup/experiment.hpp"

int main(int argc, char **argv) {
  CLI::App app{"catching-up solver for constrained differential inclusions"};
  app.require_subcommand(1);

  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> diagnostics;
  bool strict = false;
  auto add_common = [&](CLI::App *cmd) {
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "seed for randomized policies and probes");
    cmd->add_option("--diagnostics", diagnostics, "comma-separated tags or 'all'");
    cmd->add_flag("--strict", strict, "treat informational mesh failures as errors");
  };

  std::string config_path;
  auto *run = app.add_subcommand("run", "single catching-up run with diagnostics");
  auto *study = app.add_subcommand("study", "mesh-refinement study");
  auto *stability = app.add_subcommand("stability", "contraction experiment on two initial points");
  for (auto *cmd : {run, study, stability}) {
    cmd->add_option("config", config_path, "experiment configuration (JSON)")->required();
    add_common(cmd);
  }
  auto *models = app.add_subcommand("models", "model registry");
  auto *models_list = models->add_subcommand("list", "list shipped models");
  models->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : catchup::kExitConfig;
  }

  if (models_list->parsed()) {
    catchup::cmd_models_list(std::cout);
    return 0;
  }

  catchup::json config;
  try {
    config = catchup::load_json_file(config_path);
  } catch (const catchup::Error &e) {
    std::cerr << e.what() << '\n';
    return catchup::kExitConfig;
  }
  const catchup::CliOverrides over{seed, diagnostics, strict};
  catchup::CommandResult res;
  if (run->parsed())
    res = catchup::cmd_run(config, out, over);
  else if (study->parsed())
    res = catchup::cmd_study(config, out, over);
  else
    res = catchup::cmd_stability(config, out, over);
  // Config and runtime failures were already reported by the command.
  if (res.exit_code == catchup::kExitCertificate)
    std::cerr << res.message << '\n';
  return res.exit_code;
}
