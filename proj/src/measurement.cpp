#include "qclock/measurement.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qclock/csv.hpp"

namespace qclock {

namespace detail {

double sample_weak_outcome_amps(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& amps,
                                double omega, Rng& rng) {
  if (omega < 0.0) throw std::domain_error("weak_measure: negative strength");
  // Pick the mixture component by |c_m|^2, then draw from its Gaussian.
  const int d = atom_count + 1;
  const int j = atom_count / 2;
  const double target = rng.uniform() * amps.squaredNorm();
  int pick = d - 1;
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    acc += std::norm(amps(k));
    if (acc >= target) {
      pick = k;
      break;
    }
  }
  const double m = pick - j;
  return -omega * m + std::sqrt(kVacuumQuadratureVariance) * rng.normal();
}

void apply_weak_outcome_amps(int atom_count, Eigen::Ref<Eigen::VectorXcd> amps, double omega,
                             double outcome) {
  const int d = atom_count + 1;
  const int j = atom_count / 2;
  // Log-weights are shifted by their maximum so strong measurements do not
  // underflow every amplitude at once.
  double wmax = -1e300;
  Eigen::VectorXd logw(d);
  for (int k = 0; k < d; ++k) {
    const double m = k - j;
    const double r = outcome + omega * m;
    logw(k) = -0.5 * r * r / kVacuumQuadratureVariance;
    if (logw(k) > wmax) wmax = logw(k);
  }
  for (int k = 0; k < d; ++k) amps(k) *= std::exp(0.5 * (logw(k) - wmax));
  const double norm = amps.norm();
  if (norm <= 0.0) throw std::runtime_error("weak measurement produced a null posterior");
  amps /= norm;
}

double projective_measure_amps(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& amps,
                               Rng& rng) {
  const int d = atom_count + 1;
  const int j = atom_count / 2;
  const double target = rng.uniform() * amps.squaredNorm();
  double acc = 0.0;
  for (int k = 0; k < d; ++k) {
    acc += std::norm(amps(k));
    if (acc >= target) return k - j;
  }
  return atom_count - j;
}

}  // namespace detail

double sample_weak_outcome(const SpinStateVector& state, double omega, Rng& rng) {
  return detail::sample_weak_outcome_amps(state.atom_count, state.amplitudes, omega, rng);
}

void apply_weak_outcome(SpinStateVector& state, double omega, double outcome) {
  detail::apply_weak_outcome_amps(state.atom_count, state.amplitudes, omega, outcome);
}

WeakMeasurementRecord weak_measure_full(SpinStateVector& state, double omega, Rng& rng,
                                        int stage) {
  WeakMeasurementRecord record;
  record.strength = omega;
  record.stage = stage;
  record.outcome = sample_weak_outcome(state, omega, rng);
  apply_weak_outcome(state, omega, record.outcome);
  return record;
}

double sample_weak_outcome(const EnsembleMoments& moments, double omega, Rng& rng) {
  if (omega < 0.0) throw std::domain_error("weak_measure: negative strength");
  const double var = omega * omega * moments.var_y() + kVacuumQuadratureVariance;
  return rng.normal(-omega * moments.mean_y(), std::sqrt(var));
}

void apply_weak_outcome(EnsembleMoments& moments, double omega, double outcome) {
  // Joint-Gaussian conditioning on p' = -Omega y + v, Var(v) = 1/2.
  const Eigen::Vector3d h(0.0, -omega, 0.0);
  const Eigen::Vector3d cross = moments.cov * h;
  const double innovation_var = h.dot(cross) + kVacuumQuadratureVariance;
  const double innovation = outcome - h.dot(moments.mean);
  moments.mean += cross * (innovation / innovation_var);
  moments.cov -= (cross * cross.transpose()) / innovation_var;

  // Back action of the meter rotation by Pi = Omega X, Var(Pi) = Omega^2/2,
  // injected in linearized form on the transverse pair.
  const double kick = 0.5 * omega * omega;
  const double jx2 = moments.second_moment_x();
  const double jz2 = moments.second_moment_z();
  moments.cov(2, 2) += kick * jx2;
  moments.cov(0, 0) += kick * jz2;
}

WeakMeasurementRecord weak_measure_gaussian(EnsembleMoments& moments, double omega, Rng& rng,
                                            int stage) {
  WeakMeasurementRecord record;
  record.strength = omega;
  record.stage = stage;
  record.outcome = sample_weak_outcome(moments, omega, rng);
  apply_weak_outcome(moments, omega, record.outcome);
  return record;
}

double projective_measure(const SpinStateVector& state, Rng& rng) {
  return detail::projective_measure_amps(state.atom_count, state.amplitudes, rng);
}

double projective_measure(const EnsembleMoments& moments, Rng& rng) {
  const double sd = std::sqrt(std::max(0.0, moments.var_y()));
  return rng.normal(moments.mean_y(), sd);
}

PhaseEstimate estimate_phase_weak(const WeakMeasurementRecord& record, double beta,
                                  double mean_jz_initial) {
  if (!(record.strength > 0.0))
    throw std::domain_error("estimate_phase: weak stage requires Omega > 0");
  if (!(mean_jz_initial > 0.0))
    throw std::domain_error("estimate_phase: prepared <J_z> must be positive");
  PhaseEstimate est;
  est.gain = beta;
  est.value = -beta * record.outcome / (record.strength * mean_jz_initial);
  return est;
}

PhaseEstimate estimate_phase_projective(double measured_j3, double beta, double mean_jz_initial) {
  if (!(mean_jz_initial > 0.0))
    throw std::domain_error("estimate_phase: prepared <J_z> must be positive");
  PhaseEstimate est;
  est.gain = beta;
  est.value = beta * measured_j3 / mean_jz_initial;
  return est;
}

void write_schedule_csv(const std::string& path, const Eigen::VectorXd& omega,
                        const std::vector<double>& beta) {
  CsvWriter csv(path);
  csv.header({"stage", "omega", "beta"});
  for (std::size_t i = 0; i < beta.size(); ++i) {
    const double w = (static_cast<long>(i) < omega.size()) ? omega(i) : 0.0;
    csv.row(std::vector<double>{static_cast<double>(i + 1), w, beta[i]});
  }
}

}  // namespace qclock
