#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "qclock/lo_noise.hpp"
#include "qclock/protocol.hpp"
#include "qclock/rng.hpp"

namespace qclock {

struct ClockConfig {
  int atom_count = 1000;
  MeasurementSchedule schedule;
  ProtocolKind protocol = ProtocolKind::adaptive;
  Branch branch = Branch::gaussian;
  ConventionalEstimator estimator = ConventionalEstimator::linear;
  NoiseModel noise;
  double gammaT = 0.1;
  double alpha = 0.1;  // feedback gain; (0,1) for a stable loop, 0 allowed as test override
  int cycles = 10000;  // l
  std::uint64_t seed = 0;
  double carrier = 1.0;  // omega, fixed to 1 in internal units
};

struct ClockRunResult {
  Eigen::VectorXd true_phase;   // dphi(t_k), after feedback
  Eigen::VectorXd estimate;     // dphi_e(t_k)
  Eigen::VectorXd correction;   // applied frequency corrections, Delta omega(t_k) * T
  double final_correction = 0.0;
  double mean_offset = 0.0;     // mean frequency offset over tau = l T
  double sigma_gamma = 0.0;     // single-run value in units sqrt(gamma/(tau omega^2))
  long fringe_hops = 0;
  double gammaT = 0.0;
  double alpha = 0.0;
  int cycles = 0;
};

// Closed loop over l cycles: accumulated phase = free-running increment minus
// alpha times the sum of past estimates, one protocol sequence per cycle,
// final phase correction at the end.
ClockRunResult run_clock(const ClockConfig& config, Rng& rng);

// phi_final_correct = sum_i [(1-alpha)^{l-i} e_i + sum_{j<i} alpha (1-alpha)^{l-i} e_j],
// evaluated in O(l) with running accumulators.
double final_phase_correction(const Eigen::VectorXd& estimates, double alpha);

// sigma_gamma(tau) estimated by averaging the squared mean offsets of an
// ensemble of independent runs; throws on an empty ensemble.
double stability(const std::vector<ClockRunResult>& ensemble);
std::pair<double, double> stability_with_stderr(const std::vector<ClockRunResult>& ensemble);

// Periodogram of the locked per-cycle frequency series dphi(t_k)/T.
Spectrum locked_spectrum(const ClockRunResult& result, double ramsey_time);

struct EnsembleStats {
  double sigma_gamma = 0.0;
  double sigma_err = 0.0;
  double mse = 0.0;  // per-cycle <(dphi - dphi_e)^2> (shortcut) or <(sum residual)^2>/l (loop)
  double mse_err = 0.0;
  long fringe_count = 0;
  int runs = 0;
};

// alpha << 1 shortcut valid for white noise: independent Ramsey sequences
// with phi0 ~ N(0, gammaT); sigma_gamma = sqrt(<(phi0 - phi_e)^2> / gammaT).
EnsembleStats sequence_stability(const SequenceSpec& spec, double gammaT, int runs,
                                 const Rng& master, int workers = 1);

// Full-loop ensemble; required for 1/f noise.
EnsembleStats clock_stability(const ClockConfig& config, int runs, const Rng& master,
                              int workers = 1);

}  // namespace qclock
