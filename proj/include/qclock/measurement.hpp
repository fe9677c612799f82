#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qclock/moments.hpp"
#include "qclock/rng.hpp"
#include "qclock/spin_state.hpp"

namespace qclock {

// One weak dispersive probe: strength Omega = chi * mu in canonical units,
// outcome p' is the homodyne value of the light momentum quadrature.
struct WeakMeasurementRecord {
  double strength = 0.0;
  double outcome = 0.0;
  int stage = 0;
};

struct PhaseEstimate {
  double value = 0.0;
  double gain = 1.0;
};

// Vacuum probe: <X> = <P> = <XP> = 0, <X^2> = <P^2> = 1/2.
inline constexpr double kVacuumQuadratureVariance = 0.5;

// Exact conditional update for the full-quantum branch.  The outcome is
// distributed as the mixture sum_m |c_m|^2 N(-Omega m, 1/2); the posterior
// reweights amplitudes by the square root of the Gaussian likelihood.  The
// transverse back action is implicit in the reweighting.
double sample_weak_outcome(const SpinStateVector& state, double omega, Rng& rng);
void apply_weak_outcome(SpinStateVector& state, double omega, double outcome);
WeakMeasurementRecord weak_measure_full(SpinStateVector& state, double omega, Rng& rng,
                                        int stage = 0);

// Linearized conditional-Gaussian update for the moment branch, plus the
// explicit back-action injection var_z += (Omega^2/2)<J_x^2>,
// var_x += (Omega^2/2)<J_z^2> from the random meter-axis rotation.
double sample_weak_outcome(const EnsembleMoments& moments, double omega, Rng& rng);
void apply_weak_outcome(EnsembleMoments& moments, double omega, double outcome);
WeakMeasurementRecord weak_measure_gaussian(EnsembleMoments& moments, double omega, Rng& rng,
                                            int stage = 0);

// Final projective measurement of the meter axis.
double projective_measure(const SpinStateVector& state, Rng& rng);
double projective_measure(const EnsembleMoments& moments, Rng& rng);

// Weak-stage estimator  -beta p' / (Omega <J_z>)  and projective-stage
// estimator  beta J_3 / <J_z>; mean_jz_initial is <J_z> of the prepared
// state and must be positive.
PhaseEstimate estimate_phase_weak(const WeakMeasurementRecord& record, double beta,
                                  double mean_jz_initial);
PhaseEstimate estimate_phase_projective(double measured_j3, double beta, double mean_jz_initial);

// Stage-by-stage least-squares gains beta_i = Cov(residual, raw stage
// estimate) / Var(raw stage estimate), fitted from pilot Monte Carlo with
// earlier stages already calibrated.  Declared here, implemented against the
// protocol runner.
struct SequenceSpec;
std::vector<double> calibrate_betas(const SequenceSpec& spec, int pilot_runs, Rng& rng);

void write_schedule_csv(const std::string& path, const Eigen::VectorXd& omega,
                        const std::vector<double>& beta);

namespace detail {

// Raw-amplitude forms shared by the single-state API and the lockstep
// ensemble runner (which operates on matrix columns).
double sample_weak_outcome_amps(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& amps,
                                double omega, Rng& rng);
void apply_weak_outcome_amps(int atom_count, Eigen::Ref<Eigen::VectorXcd> amps, double omega,
                             double outcome);
double projective_measure_amps(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& amps,
                               Rng& rng);

}  // namespace detail

}  // namespace qclock
