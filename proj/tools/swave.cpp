// Command line front end: one subcommand per experiment, a flat key=value
// config file, and flag overrides.  Exit status: 0 verdict pass, 1 verdict
// fail, 2 unusable input, 3 precondition violated, 4 numerical failure.

#include "swave/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<FlagSpec>& flag_specs() {
  static const std::vector<FlagSpec> specs = {
      {"--preset", "preset", "named coefficient scenario (see list-presets)"},
      {"--K", "K", "number of tree steps"},
      {"--M", "M", "number of interior grid points"},
      {"--T", "T", "time horizon"},
      {"--L", "L", "interval length"},
      {"--seed", "seed", "random seed"},
      {"--out", "out", "output directory (default swave-out)"},
      {"--samples", "samples", "number of random draws"},
      {"--gamma0", "gamma0", "controlled endpoints: auto, left, right, both, none"},
      {"--budget", "budget", "tree storage budget in doubles"},
      {"--time-levels", "time_levels", "time levels in the weight tables"},
      {"--alpha", "alpha", "weight amplitude"},
      {"--x0", "x0", "weight center"},
      {"--mu0", "mu0", "convexity constant (default: the certified maximum)"},
      {"--c0", "c0", "first condition constant"},
      {"--c1", "c1", "second condition constant"},
      {"--lambda", "lambda", "weight exponent scale"},
      {"--resolutions", "resolutions", "comma separated interior resolutions"},
      {"--which", "which", "internal channel, f or g"},
      {"--mask", "mask", "allowed support range lo:hi"},
      {"--synthesis", "synthesis", "run the synthesis replay leg, on/off"},
  };
  return specs;
}

const char* help_for(const std::string& experiment) {
  if (experiment == "condition-check")
    return "verify the two convexity conditions and report admissible constants";
  if (experiment == "gamma0") return "report which endpoints the weight observes";
  if (experiment == "identity-residual")
    return "convergence order of the pointwise multiplier identity residual";
  if (experiment == "duality-check")
    return "transposition identity between controlled and dual solutions on random data";
  if (experiment == "observability")
    return "spectrum of the boundary observation Gramian and the observability constant";
  if (experiment == "hum") return "minimal norm boundary control reaching prescribed data";
  if (experiment == "negative-classical")
    return "lower bound showing the classical scheme misses last-increment targets";
  if (experiment == "negative-localized")
    return "lower bound for an internal control restricted to a subregion";
  if (experiment == "negative-noboundary")
    return "kernel of the internal observation form once the cross coupling vanishes";
  if (experiment == "reduction-check")
    return "solver pairs invert each other and synthesized controls replay";
  return "";
}

struct SubState {
  CLI::App* sub = nullptr;
  std::string config;
  std::vector<std::string> storage;
  std::vector<CLI::Option*> options;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "desk scale laboratory for boundary and internal control of a stochastic wave "
      "equation driven by an exhaustively enumerated binary increment tree"};
  app.require_subcommand(1);

  CLI::App* list_cmd = app.add_subcommand("list-presets", "print the coefficient scenarios");

  std::vector<std::unique_ptr<SubState>> states;
  for (const std::string& name : swave::experiment_names()) {
    auto st = std::make_unique<SubState>();
    st->sub = app.add_subcommand(name, help_for(name));
    st->sub->add_option("--config", st->config, "key = value configuration file");
    st->storage.resize(flag_specs().size());
    st->options.resize(flag_specs().size());
    for (std::size_t i = 0; i < flag_specs().size(); ++i)
      st->options[i] =
          st->sub->add_option(flag_specs()[i].flag, st->storage[i], flag_specs()[i].help);
    states.push_back(std::move(st));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list_cmd->parsed()) {
    std::cout << swave::list_presets_table();
    return 0;
  }

  for (const auto& st : states) {
    if (!st->sub->parsed()) continue;
    swave::ExperimentConfig cfg;
    cfg.experiment = st->sub->get_name();
    try {
      if (!st->config.empty()) swave::merge_config_file(cfg, st->config);
      for (std::size_t i = 0; i < flag_specs().size(); ++i)
        if (st->options[i]->count() > 0) cfg.set(flag_specs()[i].key, st->storage[i]);
      const swave::ExperimentOutcome outcome = swave::run_experiment(cfg);
      std::cout << swave::format_outcome(cfg, outcome);
      std::cout << "results in " << cfg.text("out", "swave-out") << '\n';
      return outcome.status;
    } catch (const swave::ConfigError& e) {
      std::cerr << "configuration error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 4;
    }
  }
  return 2;
}
