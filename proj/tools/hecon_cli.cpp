// Command-line front end. Talks to the library through the C interface only.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hecon/hecon.h"

namespace {

int exit_code(hecon_status s) {
  switch (s) {
    case HECON_OK: return 0;
    case HECON_E_IO: return 2;
    case HECON_E_CONVERGENCE: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hecon: cost-effectiveness analysis of longitudinal trials with missing data"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(hecon_version()));

  std::string config;
  std::optional<unsigned long long> seed;
  std::optional<std::string> out;
  std::vector<std::string> scenarios, families;
  std::optional<double> k_max, k_step;
  app.add_option("--config", config, "run configuration (JSON)");
  app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--out", out, "override the output directory");
  app.add_option("--scenario", scenarios, "scenario(s) to evaluate: cc mar delta0 flat skew0 skew1 cs");
  app.add_option("--family", families, "cost family: lognormal or gamma");
  app.add_option("--k-max", k_max, "largest willingness-to-pay value");
  app.add_option("--k-step", k_step, "willingness-to-pay grid step");

  for (const char* name : {"simulate", "fit", "evaluate", "assess"}) app.add_subcommand(name, std::string("run ") + name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  }

  nlohmann::json overrides = nlohmann::json::object();
  if (seed) overrides["seed"] = *seed;
  if (out) overrides["out"] = *out;
  if (!scenarios.empty()) overrides["scenarios"] = scenarios;
  if (!families.empty()) overrides["families"] = families;
  if (k_max) overrides["k_max"] = *k_max;
  if (k_step) overrides["k_step"] = *k_step;

  const std::string command = app.get_subcommands().front()->get_name();
  char* report = nullptr;
  const std::string ov = overrides.dump();
  const hecon_status s =
      hecon_run_command(command.c_str(), config.empty() ? nullptr : config.c_str(), ov.c_str(), &report);
  if (report) {
    std::puts(report);
    hecon_string_free(report);
  }
  if (s != HECON_OK) std::fprintf(stderr, "hecon %s: %s error: %s\n", command.c_str(), hecon_status_name(s), hecon_last_error());
  return exit_code(s);
}
