// Command-line front end: run one scenario file or a directory of them.
// Exit code is 0 when every check passes, 1 on usage or configuration
// errors, 2 when any check fails or its hypotheses are unmet; a suite
// exits with the maximum over its scenarios.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <harnacklab/harnacklab.hpp>

namespace {

void print_outcome(const harnacklab::RunOutcome& out) {
  std::printf("== %s  (exit %d)\n", out.name.c_str(), out.exit_code);
  if (out.report.contains("error"))
    std::printf("   error: %s\n",
                out.report["error"].get<std::string>().c_str());
  if (out.report.contains("checks"))
    for (const auto& check : out.report["checks"]) {
      std::printf("   %-28s %s", check["name"].get<std::string>().c_str(),
                  check["status"].get<std::string>().c_str());
      if (check.contains("worst_value") && check["worst_value"].is_number())
        std::printf("  worst=%.6g", check["worst_value"].get<double>());
      std::printf("\n");
    }
  for (const auto& path : out.written) std::printf("   wrote %s\n", path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical checks for curvature-coupled heat flows"};
  app.require_subcommand(1);

  harnacklab::RunOptions opt;
  std::string target;
  std::string json_path;
  bool plots = false;
  std::uint64_t seed = 0;
  std::vector<int> refine;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--csv-dir", opt.out_dir,
                    "directory for relative output paths");
    cmd->add_option("--json", json_path, "override the JSON report path");
    cmd->add_flag("--plots", plots, "emit SVG plots");
    cmd->add_option("--seed", seed, "override the scenario seed");
    cmd->add_option("--refine", refine,
                    "override residual grid levels")->expected(-1);
  };

  CLI::App* run = app.add_subcommand("run", "run one scenario file");
  run->add_option("file", target, "scenario .cfg file")->required();
  add_common(run);

  CLI::App* suite = app.add_subcommand("suite", "run every .cfg in a directory");
  suite->add_option("dir", target, "scenario directory")->required();
  add_common(suite);

  CLI11_PARSE(app, argc, argv);

  auto finish_options = [&](const CLI::App* cmd) {
    if (cmd->count("--json")) opt.json_path = json_path;
    if (cmd->count("--plots")) opt.plots = true;
    if (cmd->count("--seed")) opt.seed = seed;
    opt.refine = refine;
  };

  try {
    if (run->parsed()) {
      finish_options(run);
      const harnacklab::Scenario s = harnacklab::load_scenario(target);
      harnacklab::RunOutcome out = harnacklab::run_scenario(s, opt);
      harnacklab::emit_report(out, s, opt);
      print_outcome(out);
      return out.exit_code;
    }
    finish_options(suite);
    const auto outcomes = harnacklab::run_suite(target, opt);
    int exit_code = 0;
    for (const auto& out : outcomes) {
      print_outcome(out);
      exit_code = std::max(exit_code, out.exit_code);
    }
    return exit_code;
  } catch (const harnacklab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
