#include "qclock/clock_loop.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>

#include "qclock/parallel.hpp"
#include "qclock/stats.hpp"

namespace qclock {

namespace {

SequenceSpec sequence_spec_of(const ClockConfig& config) {
  SequenceSpec spec;
  spec.atom_count = config.atom_count;
  spec.protocol = config.protocol;
  spec.branch = config.branch;
  spec.schedule = config.schedule;
  spec.estimator = config.estimator;
  spec.gammaT = config.gammaT;
  return spec;
}

}  // namespace

ClockRunResult run_clock(const ClockConfig& config, Rng& rng) {
  if (config.cycles < 1) throw std::domain_error("run_clock: cycles must be positive");
  if (config.alpha < 0.0 || config.alpha >= 1.0)
    throw std::domain_error("run_clock: alpha must lie in [0,1)");

  LOTrace trace;
  if (config.noise.kind == NoiseKind::white) {
    trace = config.gammaT > 0.0 ? gen_white_trace(config.gammaT, config.cycles, rng)
                                : LOTrace{config.cycles, 1.0, Eigen::VectorXd::Zero(config.cycles)};
  } else {
    if (config.gammaT > 0.0) {
      trace = gen_pink_trace(config.gammaT, config.cycles, config.noise.decades_below, rng);
    } else {
      trace = LOTrace{config.cycles, 1.0, Eigen::VectorXd::Zero(config.cycles)};
    }
  }

  const SequenceContext ctx = make_sequence_context(sequence_spec_of(config));

  ClockRunResult result;
  result.cycles = config.cycles;
  result.gammaT = config.gammaT;
  result.alpha = config.alpha;
  result.true_phase.resize(config.cycles);
  result.estimate.resize(config.cycles);
  result.correction.resize(config.cycles);

  double estimate_sum = 0.0;  // sum of past estimates; phase offset is -alpha times this
  for (int k = 0; k < config.cycles; ++k) {
    const double phi = trace.increments(k) - config.alpha * estimate_sum;
    SequenceResult seq = run_sequence(ctx, phi, rng);
    result.true_phase(k) = phi;
    result.estimate(k) = seq.estimate;
    result.correction(k) = -config.alpha * seq.estimate;
    if (seq.fringe_flagged) ++result.fringe_hops;
    estimate_sum += seq.estimate;
  }

  result.final_correction = final_phase_correction(result.estimate, config.alpha);
  const double t = trace.ramsey_time;
  const double tau = config.cycles * t;
  result.mean_offset = (result.true_phase.sum() - result.final_correction) / tau;
  const double gamma_norm = config.gammaT > 0.0 ? config.gammaT : 1.0;
  result.sigma_gamma = std::abs(result.mean_offset) * t *
                       std::sqrt(config.cycles / gamma_norm) / config.carrier;
  return result;
}

double final_phase_correction(const Eigen::VectorXd& estimates, double alpha) {
  // Horner evaluation: phi_fc = sum_i (1-alpha)^{l-i} (e_i + alpha * E_{i-1}).
  double acc = 0.0;
  double prefix = 0.0;
  for (int i = 0; i < estimates.size(); ++i) {
    acc = (1.0 - alpha) * acc + (estimates(i) + alpha * prefix);
    prefix += estimates(i);
  }
  return acc;
}

double stability(const std::vector<ClockRunResult>& ensemble) {
  return stability_with_stderr(ensemble).first;
}

std::pair<double, double> stability_with_stderr(const std::vector<ClockRunResult>& ensemble) {
  if (ensemble.empty()) throw std::invalid_argument("stability: empty ensemble");
  RunningStats sq;
  for (const auto& run : ensemble) sq.add(run.sigma_gamma * run.sigma_gamma);
  const double sigma = std::sqrt(sq.mean());
  const double err = sigma > 0.0 ? 0.5 * sq.stderr_mean() / sigma : 0.0;
  return {sigma, err};
}

Spectrum locked_spectrum(const ClockRunResult& result, double ramsey_time) {
  if (result.cycles < (1 << 10))
    throw std::domain_error("locked_spectrum: run too short (need l >= 2^10)");
  return periodogram(result.true_phase / ramsey_time, ramsey_time);
}

EnsembleStats sequence_stability(const SequenceSpec& spec, double gammaT, int runs,
                                 const Rng& master, int workers) {
  if (runs < 1) throw std::invalid_argument("sequence_stability: need runs >= 1");
  const SequenceContext ctx = make_sequence_context(spec);
  const double sd = std::sqrt(gammaT);

  std::vector<double> sq(runs);
  std::vector<char> fringe(runs, 0);

  if (spec.branch == Branch::full && spec.protocol == ProtocolKind::adaptive) {
    // Lockstep batches share the dense rotation work across columns.
    const int batch_size = 128;
    const int batches = (runs + batch_size - 1) / batch_size;
    std::mutex mu;
    parallel_for(batches, workers, [&](std::size_t bi) {
      const int begin = static_cast<int>(bi) * batch_size;
      const int count = std::min(batch_size, runs - begin);
      Eigen::VectorXd phi0(count);
      std::vector<Rng> rngs;
      rngs.reserve(count);
      for (int i = 0; i < count; ++i) {
        Rng r = master.derive(begin + i);
        phi0(i) = sd * r.normal();
        rngs.push_back(std::move(r));
      }
      Eigen::VectorXd residuals, estimates;
      run_adaptive_full_lockstep(ctx, phi0, rngs, residuals, estimates);
      for (int i = 0; i < count; ++i) {
        sq[begin + i] = residuals(i) * residuals(i);
        fringe[begin + i] = std::abs(residuals(i)) > M_PI / 2.0 ? 1 : 0;
      }
    });
  } else {
    parallel_for(runs, workers, [&](std::size_t i) {
      Rng r = master.derive(i);
      const double phi0 = sd * r.normal();
      const SequenceResult seq = run_sequence(ctx, phi0, r);
      sq[i] = seq.residual * seq.residual;
      fringe[i] = seq.fringe_flagged ? 1 : 0;
    });
  }

  RunningStats stats;
  long fringes = 0;
  for (int i = 0; i < runs; ++i) {
    stats.add(sq[i]);
    fringes += fringe[i];
  }
  EnsembleStats out;
  out.runs = runs;
  out.fringe_count = fringes;
  out.mse = stats.mean();
  out.mse_err = stats.stderr_mean();
  out.sigma_gamma = std::sqrt(out.mse / gammaT);
  out.sigma_err = out.sigma_gamma > 0.0 ? 0.5 * out.mse_err / (out.sigma_gamma * gammaT) : 0.0;
  return out;
}

EnsembleStats clock_stability(const ClockConfig& config, int runs, const Rng& master,
                              int workers) {
  if (runs < 1) throw std::invalid_argument("clock_stability: need runs >= 1");
  std::vector<double> sq(runs);
  std::vector<long> fringes(runs, 0);
  parallel_for(runs, workers, [&](std::size_t i) {
    Rng r = master.derive(i);
    const ClockRunResult run = run_clock(config, r);
    sq[i] = run.sigma_gamma * run.sigma_gamma;
    fringes[i] = run.fringe_hops;
  });
  RunningStats stats;
  long fringe_total = 0;
  for (int i = 0; i < runs; ++i) {
    stats.add(sq[i]);
    fringe_total += fringes[i];
  }
  EnsembleStats out;
  out.runs = runs;
  out.fringe_count = fringe_total;
  out.mse = stats.mean();  // here: ensemble mean of squared normalized offsets
  out.mse_err = stats.stderr_mean();
  out.sigma_gamma = std::sqrt(stats.mean());
  out.sigma_err = out.sigma_gamma > 0.0 ? 0.5 * stats.stderr_mean() / out.sigma_gamma : 0.0;
  return out;
}

}  // namespace qclock
