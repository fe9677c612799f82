#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qclock/clock_loop.hpp"
#include "qclock/protocol.hpp"
#include "qclock/rng.hpp"

namespace qclock {

// Dominant noise contributions to <dPhi_n^2> with all beta = 1, evaluated
// under the independent-Gaussian surrogate for (J_z, J_x) with moments from
// gaussian_moments.  All terms are nonnegative.
struct AnalyticTermReport {
  std::array<double, 3> jz_terms{};   // <dphi^2> and sine-expansion companions
  Eigen::VectorXd backaction_terms;   // per weak stage i = 1..n-1
  Eigen::VectorXd probe_terms;        // per weak stage i = 1..n-1
  double jy_floor = 0.0;              // Var(J_y)/<J_z>^2
  double total = 0.0;
};

std::array<double, 3> jz_noise_terms(int atom_count, double kappa, int n, double gammaT);
Eigen::VectorXd backaction_terms(int atom_count, double kappa, int n,
                                 const Eigen::VectorXd& omega, double gammaT);
Eigen::VectorXd probe_noise_terms(int atom_count, double kappa, int n,
                                  const Eigen::VectorXd& omega);
AnalyticTermReport analytic_report(int atom_count, double kappa, int n,
                                   const Eigen::VectorXd& omega, double gammaT);

// (2/N + ln(sqrt(N))/N) / sqrt(gammaT), in units sqrt(gamma/(tau omega^2)).
double stability_upper_bound(double atom_count, double gammaT);

// Largest per-cycle phase spread for which the maximum of l independent
// zero-mean Gaussian phases stays below a with probability 1/2.
double sigma_max(double a, double l);
// (1 - erfc(a / (sqrt(2) sigma)))^l, the defining probability.
double sigma_max_defining_probability(double a, double sigma, double l);

struct ReferenceLimits {
  double sql = 0.0;        // N^{-1/2} / sqrt(gammaT)
  double heisenberg = 0.0; // N^{-1}   / sqrt(gammaT)
  double andre = 0.0;      // N^{-2/3} / sqrt(gammaT)
};
ReferenceLimits reference_limits(double atom_count, double gammaT);

// Smallest-noise measurement count: argmin over n of the third J_z term at
// fixed kappa (evaluated in closed form under the same Gaussian surrogate).
int locate_n_max(int atom_count, double kappa);

struct OptimizeOptions {
  int budget = 200;           // maximum number of objective evaluations
  int runs_per_eval = 20000;  // sequences per candidate (white noise)
  int pilot_runs = 5000;      // beta-calibration pilots per candidate
  int workers = 1;
  int loop_cycles = 10000;    // full-loop objective (1/f)
  int loop_runs = 100;
  double alpha = 0.1;
  std::vector<double> kappa_grid;        // empty -> defaults from N
  std::vector<int> n_grid;               // adaptive only
  std::vector<double> gammaT_grid;
  std::vector<double> omega_scale_grid;  // global multipliers on the default profile
  ConventionalEstimator estimator = ConventionalEstimator::sine_inverted;
};

struct OptimizationResult {
  MeasurementSchedule schedule;
  double gammaT = 0.0;
  double sigma = 0.0;
  double sigma_err = 0.0;
  int evaluations = 0;
  bool budget_exhausted_mid_sweep = false;
};

// Coordinate descent on per-axis grids with common random numbers across
// candidates; beta is recalibrated for every candidate.  Never returns a
// point worse than the starting schedule.
OptimizationResult optimize_stability(int atom_count, NoiseKind noise, ProtocolKind protocol,
                                      Branch branch, const OptimizeOptions& options,
                                      const Rng& master);

void write_term_report_csv(const std::string& path, const AnalyticTermReport& report);
std::string summarize(const OptimizationResult& result);

}  // namespace qclock
