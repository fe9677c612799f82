#include "qclock/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <stdexcept>

#include "qclock/analytics.hpp"
#include "qclock/csv.hpp"
#include "qclock/lo_noise.hpp"
#include "qclock/parallel.hpp"

namespace qclock {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "command",    "N",          "gammaT",     "alpha",      "l",
      "protocol",   "branch",     "noise",      "decades_below", "estimator",
      "kappa",      "n",          "sequences",  "runs",       "pilot_runs",
      "replicates", "workers",    "budget",     "trace",      "spectrum",
      "gammaT_grid", "N_grid",    "out",        "seed"};
  return keys;
}

template <typename T>
bool fetch(const json& j, const char* key, T& into, std::vector<std::string>& errors) {
  if (!j.contains(key)) return false;
  try {
    into = j.at(key).get<T>();
    return true;
  } catch (const std::exception&) {
    errors.push_back(std::string(key) + " has the wrong type");
    return false;
  }
}

MeasurementSchedule schedule_for_spec(const ExperimentSpec& spec, int atom_count) {
  if (spec.protocol == ProtocolKind::conventional) {
    MeasurementSchedule s;
    s.kappa = spec.kappa > 0.0 ? spec.kappa : std::cbrt(static_cast<double>(atom_count));
    s.n = 1;
    s.beta.assign(1, 1.0);
    return s;
  }
  MeasurementSchedule s = default_schedule(atom_count);
  if (spec.kappa > 0.0) s.kappa = spec.kappa;
  if (spec.n_meas > 0) {
    const int n = spec.n_meas;
    s.n = n;
    s.omega.resize(n - 1);
    const double n_d = static_cast<double>(atom_count);
    for (int i = 1; i < n; ++i)
      s.omega(i - 1) = std::pow(n_d, -1.0 + static_cast<double>(i) / (n + 1));
    s.beta.assign(n, 1.0);
  }
  return s;
}

SequenceSpec sequence_for(const ExperimentSpec& spec, int atom_count, ProtocolKind protocol,
                          double gammaT) {
  SequenceSpec seq;
  seq.atom_count = atom_count;
  seq.protocol = protocol;
  seq.branch = spec.branch;
  seq.estimator = spec.estimator;
  ExperimentSpec tmp = spec;
  tmp.protocol = protocol;
  seq.schedule = schedule_for_spec(tmp, atom_count);
  seq.gammaT = gammaT;
  return seq;
}

// Gains are fitted on the moment branch when its preconditions hold; the
// branches agree on the calibration regression to within pilot noise and the
// moment branch is orders of magnitude cheaper.
std::vector<double> calibrated_gains(const SequenceSpec& seq, int pilot_runs, const Rng& master) {
  SequenceSpec pilot_spec = seq;
  if (seq.branch == Branch::full && seq.atom_count >= 100 && seq.schedule.kappa >= 1.0)
    pilot_spec.branch = Branch::gaussian;
  Rng rng = master.derive(0xCA11B);
  return calibrate_betas(pilot_spec, pilot_runs, rng);
}

void write_common_meta(CsvWriter& csv, const ExperimentSpec& spec) {
  csv.meta("command", spec.command);
  csv.meta("seed", static_cast<long long>(spec.seed));
  csv.meta("N", static_cast<long long>(spec.atom_count));
  csv.meta("gammaT", spec.gammaT);
  csv.meta("alpha", spec.alpha);
  csv.meta("l", static_cast<long long>(spec.cycles));
  csv.meta("protocol", spec.both_protocols ? "both" : to_string(spec.protocol));
  csv.meta("branch", to_string(spec.branch));
  csv.meta("noise", spec.noise == NoiseKind::white ? "white" : "pink");
  csv.meta("estimator", to_string(spec.estimator));
  csv.meta("kappa", spec.kappa);
  csv.meta("n", static_cast<long long>(spec.n_meas));
  csv.meta("sequences", static_cast<long long>(spec.sequences));
  csv.meta("runs", static_cast<long long>(spec.runs));
  csv.meta("workers", static_cast<long long>(spec.workers));
  csv.meta("replicates", static_cast<long long>(spec.replicates));
}

std::string replicate_path(const std::string& base, int replicate, int replicates) {
  if (replicates <= 1) return base;
  const auto dot = base.find_last_of('.');
  const std::string stem = dot == std::string::npos ? base : base.substr(0, dot);
  const std::string ext = dot == std::string::npos ? "" : base.substr(dot);
  return stem + ".r" + std::to_string(replicate + 1) + ext;
}

ClockConfig clock_config_for(const ExperimentSpec& spec, ProtocolKind protocol,
                             const MeasurementSchedule& schedule, double gammaT) {
  ClockConfig config;
  config.atom_count = spec.atom_count;
  config.schedule = schedule;
  config.protocol = protocol;
  config.branch = spec.branch;
  config.estimator = spec.estimator;
  config.noise = NoiseModel{spec.noise, gammaT, spec.decades_below};
  config.gammaT = gammaT;
  config.alpha = spec.alpha;
  config.cycles = spec.cycles;
  config.seed = spec.seed;
  return config;
}

void run_simulate(const ExperimentSpec& spec, const std::string& path) {
  SequenceSpec seq = sequence_for(spec, spec.atom_count, spec.protocol, spec.gammaT);
  const Rng master(spec.seed);
  seq.schedule.beta = calibrated_gains(seq, spec.pilot_runs, master);
  const ClockConfig config = clock_config_for(spec, spec.protocol, seq.schedule, spec.gammaT);

  std::vector<ClockRunResult> ensemble(spec.runs);
  parallel_for(spec.runs, spec.workers, [&](std::size_t i) {
    Rng rng = master.derive(i);
    ensemble[i] = run_clock(config, rng);
  });

  CsvWriter csv(path);
  write_common_meta(csv, spec);
  const auto [sigma, err] = stability_with_stderr(ensemble);
  csv.meta("sigma_gamma", sigma);
  csv.meta("sigma_gamma_stderr", err);
  csv.header({"run", "sigma_gamma", "mean_offset", "final_correction", "fringe_hops"});
  for (int i = 0; i < spec.runs; ++i)
    csv.row(std::vector<double>{static_cast<double>(i), ensemble[i].sigma_gamma,
                                ensemble[i].mean_offset, ensemble[i].final_correction,
                                static_cast<double>(ensemble[i].fringe_hops)});

  if (spec.trace && !ensemble.empty()) {
    CsvWriter trace(path + ".trace.csv");
    write_common_meta(trace, spec);
    trace.header({"cycle", "true_phase", "estimate", "correction"});
    const ClockRunResult& run = ensemble.front();
    for (int k = 0; k < run.cycles; ++k)
      trace.row(std::vector<double>{static_cast<double>(k + 1), run.true_phase(k),
                                    run.estimate(k), run.correction(k)});
  }
}

void sweep_point(const ExperimentSpec& spec, ProtocolKind protocol, int atom_count,
                 double gammaT, std::uint64_t stream, std::vector<double>& row_out) {
  SequenceSpec seq = sequence_for(spec, atom_count, protocol, gammaT);
  const Rng master = Rng(spec.seed).derive(stream);
  seq.schedule.beta = calibrated_gains(seq, spec.pilot_runs, master);

  EnsembleStats stats;
  if (spec.noise == NoiseKind::white) {
    stats = sequence_stability(seq, gammaT, spec.sequences, master.derive(1), spec.workers);
  } else {
    ExperimentSpec tmp = spec;
    tmp.atom_count = atom_count;
    const ClockConfig config = clock_config_for(tmp, protocol, seq.schedule, gammaT);
    stats = clock_stability(config, spec.runs, master.derive(1), spec.workers);
  }
  row_out = {static_cast<double>(atom_count), gammaT, 0.0, 0.0, stats.sigma_gamma,
             stats.sigma_err};
}

void run_sweep(const ExperimentSpec& spec, const std::string& path, bool over_ramsey) {
  std::vector<ProtocolKind> protocols;
  if (spec.both_protocols)
    protocols = {ProtocolKind::adaptive, ProtocolKind::conventional};
  else
    protocols = {spec.protocol};

  CsvWriter csv(path);
  write_common_meta(csv, spec);
  csv.header({"N", "gammaT", "protocol", "branch", "sigma_gamma", "stderr"});

  std::uint64_t stream = 0;
  for (ProtocolKind protocol : protocols) {
    if (over_ramsey) {
      for (double g : spec.gammaT_grid) {
        std::vector<double> row;
        sweep_point(spec, protocol, spec.atom_count, g, stream++, row);
        csv.row({csv_format(row[0]), csv_format(row[1]), to_string(protocol),
                 to_string(spec.branch), csv_format(row[4]), csv_format(row[5])});
      }
    } else {
      for (long long n_atoms : spec.atom_grid) {
        std::vector<double> row;
        sweep_point(spec, protocol, static_cast<int>(n_atoms), spec.gammaT, stream++, row);
        csv.row({csv_format(row[0]), csv_format(row[1]), to_string(protocol),
                 to_string(spec.branch), csv_format(row[4]), csv_format(row[5])});
      }
    }
  }
}

void run_spectrum(const ExperimentSpec& spec, const std::string& path) {
  const Rng master(spec.seed);
  Eigen::VectorXd sum;
  Eigen::VectorXd freq;

  if (spec.spectrum_what == "free") {
    for (int i = 0; i < spec.runs; ++i) {
      Rng rng = master.derive(i);
      const LOTrace trace = spec.noise == NoiseKind::white
                                ? gen_white_trace(spec.gammaT, spec.cycles, rng)
                                : gen_pink_trace(spec.gammaT, spec.cycles, spec.decades_below, rng);
      const Spectrum s = periodogram(trace.increments / trace.ramsey_time, trace.ramsey_time);
      if (sum.size() == 0) {
        sum = s.power;
        freq = s.frequency;
      } else {
        sum += s.power;
      }
    }
  } else {
    SequenceSpec seq = sequence_for(spec, spec.atom_count, spec.protocol, spec.gammaT);
    seq.schedule.beta = calibrated_gains(seq, spec.pilot_runs, master);
    const ClockConfig config = clock_config_for(spec, spec.protocol, seq.schedule, spec.gammaT);
    std::vector<Spectrum> spectra(spec.runs);
    parallel_for(spec.runs, spec.workers, [&](std::size_t i) {
      Rng rng = master.derive(i);
      const ClockRunResult run = run_clock(config, rng);
      spectra[i] = locked_spectrum(run, 1.0);
    });
    for (const auto& s : spectra) {
      if (sum.size() == 0) {
        sum = s.power;
        freq = s.frequency;
      } else {
        sum += s.power;
      }
    }
  }
  sum /= static_cast<double>(spec.runs);

  CsvWriter csv(path);
  write_common_meta(csv, spec);
  csv.meta("spectrum", spec.spectrum_what);
  csv.header({"frequency", "S"});
  for (int i = 0; i < sum.size(); ++i)
    csv.row(std::vector<double>{freq(i), sum(i)});
}

void run_analytic(const ExperimentSpec& spec, const std::string& path) {
  ExperimentSpec tmp = spec;
  tmp.protocol = ProtocolKind::adaptive;
  const MeasurementSchedule schedule = schedule_for_spec(tmp, spec.atom_count);
  const AnalyticTermReport report = analytic_report(spec.atom_count, schedule.kappa, schedule.n,
                                                    schedule.omega, spec.gammaT);
  const ReferenceLimits limits =
      reference_limits(static_cast<double>(spec.atom_count), spec.gammaT);

  CsvWriter csv(path);
  write_common_meta(csv, spec);
  csv.meta("kappa_used", schedule.kappa);
  csv.meta("n_used", static_cast<long long>(schedule.n));
  csv.meta("upper_bound",
           stability_upper_bound(static_cast<double>(spec.atom_count), spec.gammaT));
  csv.meta("sql", limits.sql);
  csv.meta("heisenberg", limits.heisenberg);
  csv.meta("andre", limits.andre);
  csv.meta("n_max", static_cast<long long>(locate_n_max(spec.atom_count, schedule.kappa)));
  csv.header({"term", "stage", "value"});
  for (int i = 0; i < 3; ++i)
    csv.row({std::string("jz") + std::to_string(i + 1), "0", csv_format(report.jz_terms[i])});
  for (int i = 0; i < report.backaction_terms.size(); ++i)
    csv.row({"backaction", std::to_string(i + 1), csv_format(report.backaction_terms(i))});
  for (int i = 0; i < report.probe_terms.size(); ++i)
    csv.row({"probe", std::to_string(i + 1), csv_format(report.probe_terms(i))});
  csv.row({"jy_floor", "0", csv_format(report.jy_floor)});
  csv.row({"total", "0", csv_format(report.total)});
}

void run_optimize(const ExperimentSpec& spec, const std::string& path) {
  OptimizeOptions options;
  options.budget = spec.budget;
  options.runs_per_eval = spec.sequences;
  options.pilot_runs = spec.pilot_runs;
  options.workers = spec.workers;
  options.loop_cycles = spec.cycles;
  options.loop_runs = spec.runs;
  options.alpha = spec.alpha;
  options.estimator = spec.estimator;
  const OptimizationResult result = optimize_stability(
      spec.atom_count, spec.noise, spec.protocol, spec.branch, options, Rng(spec.seed));

  const std::string summary = summarize(result);
  std::cout << summary;

  CsvWriter csv(path);
  write_common_meta(csv, spec);
  csv.meta("best_sigma_gamma", result.sigma);
  csv.meta("best_sigma_stderr", result.sigma_err);
  csv.meta("best_kappa", result.schedule.kappa);
  csv.meta("best_n", static_cast<long long>(result.schedule.n));
  csv.meta("best_gammaT", result.gammaT);
  csv.meta("evaluations", static_cast<long long>(result.evaluations));
  csv.header({"stage", "omega", "beta"});
  for (std::size_t i = 0; i < result.schedule.beta.size(); ++i) {
    const double w =
        static_cast<long>(i) < result.schedule.omega.size() ? result.schedule.omega(i) : 0.0;
    csv.row(std::vector<double>{static_cast<double>(i + 1), w, result.schedule.beta[i]});
  }
}

}  // namespace

ValidationResult validate_spec(const std::string& json_text) {
  ValidationResult result;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    result.errors.push_back(std::string("config is not valid JSON: ") + e.what());
    return result;
  }
  if (!j.is_object()) {
    result.errors.push_back("config must be a JSON object");
    return result;
  }

  auto& errors = result.errors;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known_keys().count(it.key())) errors.push_back("unknown key: " + it.key());

  ExperimentSpec spec;
  fetch(j, "command", spec.command, errors);
  static const std::set<std::string> commands = {"simulate", "sweep-ramsey", "sweep-N",
                                                 "spectrum", "analytic",    "optimize"};
  if (!commands.count(spec.command))
    errors.push_back("command must be one of simulate, sweep-ramsey, sweep-N, spectrum, "
                     "analytic, optimize");

  long long n_atoms = spec.atom_count;
  if (fetch(j, "N", n_atoms, errors)) {
    if (n_atoms < 2 || n_atoms % 2 != 0)
      errors.push_back("N must be even and >= 2");
    else if (n_atoms > 2000000000LL)
      errors.push_back("N too large");
    else
      spec.atom_count = static_cast<int>(n_atoms);
  }
  fetch(j, "gammaT", spec.gammaT, errors);
  if (!(spec.gammaT > 0.0)) errors.push_back("gammaT must be positive");
  if (fetch(j, "alpha", spec.alpha, errors) || true) {
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) errors.push_back("alpha must lie in (0,1)");
  }
  long long cycles = spec.cycles;
  if (fetch(j, "l", cycles, errors)) {
    if (cycles < 100)
      errors.push_back("l must be >= 100");
    else if (cycles > 100000000LL)
      errors.push_back("l too large");
    else
      spec.cycles = static_cast<int>(cycles);
  }

  std::string protocol = "adaptive";
  if (fetch(j, "protocol", protocol, errors) || true) {
    if (protocol == "adaptive") {
      spec.protocol = ProtocolKind::adaptive;
    } else if (protocol == "conventional") {
      spec.protocol = ProtocolKind::conventional;
    } else if (protocol == "both") {
      spec.both_protocols = true;
    } else {
      errors.push_back("protocol must be adaptive, conventional, or both");
    }
  }
  std::string branch = "gaussian";
  if (fetch(j, "branch", branch, errors) || true) {
    if (branch == "full")
      spec.branch = Branch::full;
    else if (branch == "gaussian")
      spec.branch = Branch::gaussian;
    else
      errors.push_back("branch must be full or gaussian");
  }
  std::string noise = "white";
  if (fetch(j, "noise", noise, errors) || true) {
    if (noise == "white")
      spec.noise = NoiseKind::white;
    else if (noise == "pink")
      spec.noise = NoiseKind::pink;
    else
      errors.push_back("noise must be white or pink");
  }
  std::string estimator = "sine-inverted";
  if (fetch(j, "estimator", estimator, errors) || true) {
    if (estimator == "linear")
      spec.estimator = ConventionalEstimator::linear;
    else if (estimator == "sine-inverted")
      spec.estimator = ConventionalEstimator::sine_inverted;
    else
      errors.push_back("estimator must be linear or sine-inverted");
  }

  fetch(j, "decades_below", spec.decades_below, errors);
  if (spec.decades_below < 2) errors.push_back("decades_below must be >= 2");
  fetch(j, "kappa", spec.kappa, errors);
  if (spec.kappa < 0.0) errors.push_back("kappa must be positive when given");
  fetch(j, "n", spec.n_meas, errors);
  if (spec.n_meas < 0) errors.push_back("n must be positive when given");
  fetch(j, "sequences", spec.sequences, errors);
  if (spec.sequences < 1) errors.push_back("sequences must be positive");
  fetch(j, "runs", spec.runs, errors);
  if (spec.runs < 1) errors.push_back("runs must be positive");
  fetch(j, "pilot_runs", spec.pilot_runs, errors);
  if (spec.pilot_runs < 1000) errors.push_back("pilot_runs must be >= 1000");
  fetch(j, "replicates", spec.replicates, errors);
  if (spec.replicates < 1) errors.push_back("replicates must be positive");
  fetch(j, "workers", spec.workers, errors);
  if (spec.workers < 1) errors.push_back("workers must be positive");
  fetch(j, "budget", spec.budget, errors);
  fetch(j, "trace", spec.trace, errors);
  fetch(j, "spectrum", spec.spectrum_what, errors);
  if (spec.spectrum_what != "locked" && spec.spectrum_what != "free")
    errors.push_back("spectrum must be locked or free");
  fetch(j, "gammaT_grid", spec.gammaT_grid, errors);
  fetch(j, "N_grid", spec.atom_grid, errors);
  fetch(j, "out", spec.out, errors);

  if (j.contains("seed")) {
    long long seed = 0;
    if (fetch(j, "seed", seed, errors)) spec.seed = static_cast<std::uint64_t>(seed);
  } else {
    errors.push_back("seed is mandatory (no wall-clock seeding)");
  }

  if (spec.command == "sweep-ramsey" && spec.gammaT_grid.empty())
    errors.push_back("sweep-ramsey requires a non-empty gammaT_grid");
  if (spec.command == "sweep-N" && spec.atom_grid.empty())
    errors.push_back("sweep-N requires a non-empty N_grid");
  for (double g : spec.gammaT_grid)
    if (!(g > 0.0)) errors.push_back("gammaT_grid entries must be positive");
  for (long long n : spec.atom_grid)
    if (n < 100 || n % 2 != 0) errors.push_back("N_grid entries must be even and >= 100");

  if (errors.empty()) result.spec = spec;
  return result;
}

int run_experiment(const ExperimentSpec& spec) {
  namespace fs = std::filesystem;
  std::vector<std::string> written;
  try {
    for (int r = 0; r < spec.replicates; ++r) {
      const std::string path = replicate_path(spec.out, r, spec.replicates);
      written.push_back(path);
      if (spec.command == "simulate") {
        run_simulate(spec, path);
      } else if (spec.command == "sweep-ramsey") {
        run_sweep(spec, path, true);
      } else if (spec.command == "sweep-N") {
        run_sweep(spec, path, false);
      } else if (spec.command == "spectrum") {
        run_spectrum(spec, path);
      } else if (spec.command == "analytic") {
        run_analytic(spec, path);
      } else if (spec.command == "optimize") {
        run_optimize(spec, path);
      } else {
        std::cerr << "error: unknown command " << spec.command << "\n";
        return 2;
      }
    }
  } catch (const std::exception& e) {
    // Partial outputs are removed so failed runs leave nothing behind.
    for (const auto& path : written) {
      std::error_code ec;
      fs::remove(path, ec);
      fs::remove(path + ".trace.csv", ec);
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace qclock
