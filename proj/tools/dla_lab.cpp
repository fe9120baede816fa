#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlalab/experiment.hpp"

namespace {

struct Flag {
  const char* name;  // --name on the command line
  const char* key;   // config key
  const char* help;
};

// Value flags per subcommand; all are plain overrides of config-file keys.
const std::map<std::string, std::vector<Flag>>& flag_table() {
  static const std::map<std::string, std::vector<Flag>> t{
      {"simulate",
       {{"--kind", "kind", "intermediate | edla"},
        {"--m", "m", "seed segment half-width (intermediate)"},
        {"--N", "N", "absorber half-width (intermediate)"},
        {"--steps", "steps", "EDLA step count"},
        {"--seed-set", "seed_set", "EDLA initial set, e.g. D1"},
        {"--horizon", "horizon", "step horizon"},
        {"--time", "time", "time horizon"},
        {"--replicas", "replicas", "number of replicas"},
        {"--snapshots", "snapshots", "snapshot steps, e.g. 0,64,512"},
        {"--acceleration", "acceleration", "square | none"},
        {"--reentry", "reentry", "poisson | fresh"},
        {"--launch", "launch", "uniform | exact"},
        {"--launch-radius", "launch_radius", "launch ring radius"}}},
      {"measure",
       {{"--set", "set", "target set: D1, \"(0,0),(1,0)\", D8\\D2, ..."},
        {"--absorber", "absorber", "absorbing set"},
        {"--method", "method", "exact | mc | both"},
        {"--walkers", "walkers", "MC walker count"},
        {"--n", "n", "sizes for --estimate-c, e.g. 8,16,32,64"},
        {"--launch", "launch", "auto | uniform | exact"},
        {"--launch-radius", "launch_radius", "MC launch ring radius"},
        {"--acceleration", "acceleration", "square | none"},
        {"--max-unknowns", "max_unknowns", "exact solver size cap"},
        {"--tolerance", "tolerance", "exact solver residual tolerance"},
        {"--inner-radius", "inner_radius", "estimate-c inner ring (multiple of n+1)"}}},
      {"couple",
       {{"--m1", "m1", "smaller seed half-width"},
        {"--m2", "m2", "larger seed half-width"},
        {"--N", "N", "absorber half-width"},
        {"--alpha", "alpha", "classification exponent in (0, 0.2)"},
        {"--window", "window", "window box [x0,x1,y0,y1]"},
        {"--horizon", "horizon", "step horizon"},
        {"--replicas", "replicas", "number of replicas"},
        {"--acceleration", "acceleration", "square | none"}}},
      {"verify", {{"--suite", "suite", "suite name(s), comma separated, or all"}}},
      {"report", {{"--in", "in", "output file to summarise"}}}};
  return t;
}

const std::map<std::string, const char*> kDescriptions{
    {"simulate", "run EDLA or the intermediate process"},
    {"measure", "edge harmonic measure tables or the scaling constant"},
    {"couple", "run the walker-shared coupling"},
    {"verify", "run acceptance criteria"},
    {"report", "summarise an output file"}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dla_lab: edge DLA Monte Carlo lab"};
  app.set_version_flag("--version", std::string(dlalab::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> params;
  std::uint64_t seed = 0;
  bool overwrite = false, quick = false, estimate_c = false;
  std::string out;
  std::map<std::string, std::map<std::string, std::string>> raw;

  for (const auto& [name, flags] : flag_table()) {
    CLI::App* sub = app.add_subcommand(name, kDescriptions.at(name));
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--param", params, "extra key=value override (repeatable)");
    sub->add_option("--seed", seed, "64-bit seed (default: DLA_LAB_SEED or 1)");
    sub->add_option("--out", out, "output path");
    sub->add_flag("--overwrite", overwrite, "overwrite instead of writing a timestamped sibling");
    for (const Flag& f : flags) sub->add_option(f.name, raw[name][f.key], f.help);
    if (name == "measure") sub->add_flag("--estimate-c", estimate_c, "estimate the scaling constant");
    if (name == "verify") sub->add_flag("--quick", quick, "reduced replica counts");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  CLI::App* sub = app.get_subcommands().front();
  try {
    dlalab::ExperimentConfig cfg =
        config_path.empty() ? dlalab::ExperimentConfig{} : dlalab::ExperimentConfig::from_file(config_path);
    for (const auto& p : params) {
      const auto eq = p.find('=');
      if (eq == std::string::npos || eq == 0) throw dlalab::UsageError("--param expects key=value, got '" + p + "'");
      cfg.set_raw(p.substr(0, eq), p.substr(eq + 1));
    }
    for (const Flag& f : flag_table().at(command)) {
      if (sub->count(f.name) > 0) cfg.set_raw(f.key, raw[command][f.key]);
    }
    if (sub->count("--seed") > 0) cfg.set("seed", seed);
    if (sub->count("--out") > 0) cfg.set("out", out);
    if (overwrite) cfg.set("overwrite", true);
    if (quick) cfg.set("quick", true);
    if (estimate_c) cfg.set("estimate_c", true);

    const dlalab::CommandResult res = dlalab::run_command(command, cfg);
    std::cout << res.message;
    if (!res.message.empty() && res.message.back() != '\n') std::cout << '\n';
    if (command == "verify") {
      for (const auto& p : res.outputs) std::cout << "wrote " << p.string() << '\n';
    }
    return res.exit_code;
  } catch (const dlalab::UsageError& e) {
    std::cerr << "dla_lab " << command << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dla_lab " << command << ": " << e.what() << '\n';
    return 1;
  }
}
