#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "qclock/experiment.hpp"

namespace {

using nlohmann::json;

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::vector<long long> parse_int_list(const std::string& text) {
  std::vector<long long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo studies of a quantum-noise-limited atomic clock with "
               "spin-squeezed ensembles and adaptive weak measurements"};

  std::string command, config_path, out, protocol, branch, noise, estimator, spectrum;
  std::string gammaT_grid, n_grid;
  std::optional<long long> seed, n_atoms, cycles, replicates, workers, sequences, runs;
  std::optional<long long> pilot_runs, budget, n_meas, decades_below;
  std::optional<double> gammaT, alpha, kappa;
  bool trace = false;

  app.add_option("--command", command, "simulate | sweep-ramsey | sweep-N | spectrum | analytic | optimize");
  app.add_option("--config", config_path, "JSON config file; flags override file values");
  app.add_option("--seed", seed, "master seed (mandatory, no wall-clock seeding)");
  app.add_option("--workers", workers, "worker threads; results are independent of this");
  app.add_option("--out", out, "output CSV path");
  app.add_option("--N", n_atoms, "atom count (even)");
  app.add_option("--gammaT", gammaT, "Ramsey-time noise product");
  app.add_option("--alpha", alpha, "feedback gain in (0,1)");
  app.add_option("--protocol", protocol, "adaptive | conventional | both");
  app.add_option("--branch", branch, "full | gaussian");
  app.add_option("--noise", noise, "white | pink");
  app.add_option("--l", cycles, "cycles per clock run");
  app.add_option("--replicates", replicates, "replicate output count");
  app.add_option("--kappa", kappa, "squeezing parameter override");
  app.add_option("--n", n_meas, "measurement count override");
  app.add_option("--sequences", sequences, "sequences per sweep point (white noise)");
  app.add_option("--runs", runs, "clock runs per ensemble");
  app.add_option("--pilot-runs", pilot_runs, "beta-calibration pilot count");
  app.add_option("--budget", budget, "optimizer evaluation budget");
  app.add_option("--estimator", estimator, "conventional estimator: linear | sine-inverted");
  app.add_option("--decades-below", decades_below, "pink low-frequency cutoff decades");
  app.add_option("--spectrum", spectrum, "spectrum selection: locked | free");
  app.add_option("--gammaT-grid", gammaT_grid, "comma-separated gammaT grid");
  app.add_option("--N-grid", n_grid, "comma-separated atom-count grid");
  app.add_flag("--trace", trace, "also write a per-cycle trace CSV");

  CLI11_PARSE(app, argc, argv);

  json merged = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file " << config_path << "\n";
      return 2;
    }
    try {
      in >> merged;
    } catch (const std::exception& e) {
      std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
      return 2;
    }
  }

  if (!command.empty()) merged["command"] = command;
  if (seed) merged["seed"] = *seed;
  if (workers) merged["workers"] = *workers;
  if (!out.empty()) merged["out"] = out;
  if (n_atoms) merged["N"] = *n_atoms;
  if (gammaT) merged["gammaT"] = *gammaT;
  if (alpha) merged["alpha"] = *alpha;
  if (!protocol.empty()) merged["protocol"] = protocol;
  if (!branch.empty()) merged["branch"] = branch;
  if (!noise.empty()) merged["noise"] = noise;
  if (cycles) merged["l"] = *cycles;
  if (replicates) merged["replicates"] = *replicates;
  if (kappa) merged["kappa"] = *kappa;
  if (n_meas) merged["n"] = *n_meas;
  if (sequences) merged["sequences"] = *sequences;
  if (runs) merged["runs"] = *runs;
  if (pilot_runs) merged["pilot_runs"] = *pilot_runs;
  if (budget) merged["budget"] = *budget;
  if (!estimator.empty()) merged["estimator"] = estimator;
  if (decades_below) merged["decades_below"] = *decades_below;
  if (!spectrum.empty()) merged["spectrum"] = spectrum;
  if (trace) merged["trace"] = true;
  try {
    if (!gammaT_grid.empty()) merged["gammaT_grid"] = parse_double_list(gammaT_grid);
    if (!n_grid.empty()) merged["N_grid"] = parse_int_list(n_grid);
  } catch (const std::exception&) {
    std::cerr << "error: malformed grid list\n";
    return 2;
  }

  const qclock::ValidationResult validated = qclock::validate_spec(merged.dump());
  if (!validated.spec) {
    for (const auto& e : validated.errors) std::cerr << "error: " << e << "\n";
    return 2;
  }
  return qclock::run_experiment(*validated.spec);
}
