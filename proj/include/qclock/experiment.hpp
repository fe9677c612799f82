#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qclock/clock_loop.hpp"
#include "qclock/protocol.hpp"

namespace qclock {

// Resolved experiment description.  Mirrors ClockConfig plus sweep grids and
// orchestration knobs; produced only by validate_spec.
struct ExperimentSpec {
  std::string command;  // simulate | sweep-ramsey | sweep-N | spectrum | analytic | optimize
  int atom_count = 1000;
  double gammaT = 0.1;
  double alpha = 0.1;
  int cycles = 10000;           // l
  ProtocolKind protocol = ProtocolKind::adaptive;
  bool both_protocols = false;  // sweeps may compare adaptive and conventional
  Branch branch = Branch::gaussian;
  NoiseKind noise = NoiseKind::white;
  int decades_below = 4;
  ConventionalEstimator estimator = ConventionalEstimator::sine_inverted;
  double kappa = 0.0;  // 0 -> default_schedule heuristic
  int n_meas = 0;      // 0 -> default_schedule heuristic
  int sequences = 10000;
  int runs = 100;
  int pilot_runs = 10000;
  int replicates = 1;
  int workers = 1;
  int budget = 120;  // optimize
  bool trace = false;
  std::string spectrum_what = "locked";  // locked | free
  std::vector<double> gammaT_grid;
  std::vector<long long> atom_grid;
  std::string out = "out.csv";
  std::uint64_t seed = 0;
};

struct ValidationResult {
  std::optional<ExperimentSpec> spec;
  std::vector<std::string> errors;  // all violations, not only the first
};

// Parses and validates a JSON config document (already merged with any
// command-line overrides).  Reports every violation.
ValidationResult validate_spec(const std::string& json_text);

// Executes the named study; outputs are deterministic given (spec, seed) and
// independent of the worker count.  Returns the process exit status.
int run_experiment(const ExperimentSpec& spec);

}  // namespace qclock
