#pragma once

// Experiment drivers behind the command line tool: named coefficient
// presets, a flat key=value configuration with typed accessors, and one
// runner per experiment.  Each run writes result.csv and report.txt (plus
// experiment-specific tables) into the chosen output directory; all output
// is deterministic for a fixed configuration and seed.

#include "swave/carleman.hpp"
#include "swave/control.hpp"
#include "swave/grid.hpp"
#include "swave/solvers.hpp"
#include "swave/tree.hpp"

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace swave {

// Malformed input: unreadable config files, bad key=value lines, values that
// fail to parse, unknown keys, unknown preset names.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Named coefficient scenario.  Profiles are functions of x on [0, length];
// a null lower-order profile means identically zero.
struct Preset {
  std::string name;
  std::string summary;
  double length = 1.0;
  double horizon = 2.5;
  double x0 = -1.0;     // weight center
  double alpha = 4.0;   // weight amplitude
  std::function<double(double)> a;
  std::function<double(double)> a1, a2, a3, a4, a5;
};

const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name);  // ConfigError when unknown

// Sample the lower-order profiles at the interior nodes.  The cross coupling
// is forced to exactly zero at the first and last interior node, matching
// the support restriction the scheme validates.
CoefficientSet sample_coefficients(const Preset& preset, const Grid& grid);

// Flat string map merged from a config file and command line flags; flags
// win because they are applied afterwards.  Typed accessors raise
// ConfigError on values that do not parse.
struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values[key] = value; }

  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  std::vector<int> integer_list(const std::string& key, const std::vector<int>& fallback) const;
};

// key = value lines, '#' starts a comment, blank lines are skipped.
void merge_config_file(ExperimentConfig& cfg, const std::string& path);

const std::vector<std::string>& experiment_names();
std::string list_presets_table();

struct ExperimentOutcome {
  int status = 0;  // 0 verdict pass, 1 verdict fail, 3 precondition, 4 numerical
  bool verdict = false;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> notes;
};

// Text block shared by report.txt and the command line summary.
std::string format_outcome(const ExperimentConfig& cfg, const ExperimentOutcome& outcome);

// Validate keys, create the output directory, dispatch on cfg.experiment,
// and write result.csv / report.txt.  ConfigError propagates to the caller;
// precondition violations and numerical failures are folded into the
// returned status (3 and 4) with an explanatory note.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

}  // namespace swave
