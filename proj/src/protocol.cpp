#include "qclock/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "qclock/csv.hpp"

namespace qclock {

namespace {

constexpr double kFringeThreshold = M_PI / 2.0;

// A true phase phi is imprinted as the rotation exp(+i phi J_x), i.e.
// rotate_state(axis1, -phi); this makes <J_y> = sin(phi) <J_z> so the
// estimators below are positively correlated with phi.
inline void imprint_phase(SpinStateVector& state, double phi) {
  rotate_state_in_place(state, RotationAxis::axis1, -phi);
}

inline void imprint_phase(EnsembleMoments& moments, double phi) {
  moments = rotate_moments(moments, RotationAxis::axis1, -phi);
}

double conventional_raw_estimate(double j3, double jz0, ConventionalEstimator estimator) {
  const double y = j3 / jz0;
  if (estimator == ConventionalEstimator::linear) return y;
  return std::asin(std::clamp(y, -1.0, 1.0));
}

void check_spec(const SequenceSpec& spec) {
  if (!spec.schedule.shape_ok())
    throw std::invalid_argument("sequence: schedule/beta shapes are inconsistent");
  if (spec.protocol == ProtocolKind::conventional && spec.schedule.n != 1)
    throw std::invalid_argument("sequence: conventional protocol has a single measurement");
  for (int i = 0; i + 1 < spec.schedule.n; ++i)
    if (!(spec.schedule.omega(i) > 0.0))
      throw std::invalid_argument("sequence: weak strengths must be positive");
}

}  // namespace

MeasurementSchedule default_schedule(int atom_count) {
  if (atom_count < 100) throw std::domain_error("default_schedule: requires N >= 100");
  MeasurementSchedule s;
  const double n_d = static_cast<double>(atom_count);
  s.kappa = std::log(std::sqrt(n_d)) + 2.0;
  s.n = static_cast<int>(std::ceil(3.0 * std::log(n_d)));
  s.omega.resize(s.n - 1);
  for (int i = 1; i < s.n; ++i)
    s.omega(i - 1) = std::pow(n_d, -1.0 + static_cast<double>(i) / (s.n + 1));
  s.beta.assign(s.n, 1.0);
  return s;
}

SequenceContext make_sequence_context(const SequenceSpec& spec) {
  check_spec(spec);
  SequenceContext ctx;
  ctx.spec = spec;
  if (spec.branch == Branch::full) {
    ctx.prepared = build_squeezed_state(spec.atom_count, spec.schedule.kappa);
    ctx.mean_jz0 = exact_moments(ctx.prepared).mean_z();
  } else {
    ctx.prepared_moments = gaussian_moments(spec.atom_count, spec.schedule.kappa);
    ctx.mean_jz0 = ctx.prepared_moments.mean_z();
  }
  if (!(ctx.mean_jz0 > 0.0))
    throw std::runtime_error("sequence: prepared <J_z> is not positive");
  return ctx;
}

namespace {

template <typename State>
WeakMeasurementRecord do_weak(State& state, double omega, Rng& rng, int stage);

template <>
WeakMeasurementRecord do_weak(SpinStateVector& state, double omega, Rng& rng, int stage) {
  return weak_measure_full(state, omega, rng, stage);
}
template <>
WeakMeasurementRecord do_weak(EnsembleMoments& state, double omega, Rng& rng, int stage) {
  return weak_measure_gaussian(state, omega, rng, stage);
}

template <typename State>
SequenceResult run_generic(const SequenceContext& ctx, State state, double phi0, Rng& rng,
                           const SequenceOptions& options) {
  const MeasurementSchedule& sched = ctx.spec.schedule;
  SequenceResult result;
  result.true_phase = phi0;
  if (options.record_stages) result.stages.reserve(sched.n);

  imprint_phase(state, phi0);
  double estimate_sum = 0.0;
  for (int i = 1; i < sched.n; ++i) {
    WeakMeasurementRecord rec = do_weak(state, sched.omega(i - 1), rng, i);
    PhaseEstimate est = estimate_phase_weak(rec, sched.beta[i - 1], ctx.mean_jz0);
    imprint_phase(state, -est.value);  // feedback counter-rotation
    estimate_sum += est.value;
    if (options.record_stages) result.stages.push_back({rec, est});
  }

  const double j3 = projective_measure(state, rng);
  PhaseEstimate final_est;
  if (ctx.spec.protocol == ProtocolKind::conventional &&
      ctx.spec.estimator == ConventionalEstimator::sine_inverted) {
    final_est.gain = sched.beta.back();
    final_est.value =
        sched.beta.back() * conventional_raw_estimate(j3, ctx.mean_jz0, ctx.spec.estimator);
  } else {
    final_est = estimate_phase_projective(j3, sched.beta.back(), ctx.mean_jz0);
  }
  estimate_sum += final_est.value;
  if (options.record_stages) {
    WeakMeasurementRecord rec;
    rec.strength = 0.0;  // projective stage carries the measured J3
    rec.outcome = j3;
    rec.stage = sched.n;
    result.stages.push_back({rec, final_est});
  }

  result.estimate = estimate_sum;
  result.residual = phi0 - estimate_sum;
  result.fringe_flagged =
      std::abs(result.residual) > kFringeThreshold || std::abs(phi0) >= M_PI;
  return result;
}

}  // namespace

SequenceResult run_sequence(const SequenceContext& ctx, double phi0, Rng& rng,
                            const SequenceOptions& options) {
  if (ctx.spec.branch == Branch::full)
    return run_generic<SpinStateVector>(ctx, ctx.prepared, phi0, rng, options);
  return run_generic<EnsembleMoments>(ctx, ctx.prepared_moments, phi0, rng, options);
}

SequenceResult run_sequence(const SequenceSpec& spec, double phi0, Rng& rng,
                            const SequenceOptions& options) {
  return run_sequence(make_sequence_context(spec), phi0, rng, options);
}

SequenceResult run_adaptive_sequence(int atom_count, const MeasurementSchedule& schedule,
                                     double phi0, Branch branch, Rng& rng,
                                     const SequenceOptions& options) {
  SequenceSpec spec;
  spec.atom_count = atom_count;
  spec.protocol = ProtocolKind::adaptive;
  spec.branch = branch;
  spec.schedule = schedule;
  return run_sequence(spec, phi0, rng, options);
}

SequenceResult run_conventional_ramsey(int atom_count, double kappa, double beta, double phi0,
                                       Branch branch, Rng& rng, ConventionalEstimator estimator,
                                       const SequenceOptions& options) {
  SequenceSpec spec;
  spec.atom_count = atom_count;
  spec.protocol = ProtocolKind::conventional;
  spec.branch = branch;
  spec.estimator = estimator;
  spec.schedule.kappa = kappa;
  spec.schedule.n = 1;
  spec.schedule.beta.assign(1, beta);
  return run_sequence(spec, phi0, rng, options);
}

void run_adaptive_full_lockstep(const SequenceContext& ctx, const Eigen::VectorXd& phi0,
                                std::vector<Rng>& rngs, Eigen::VectorXd& residuals,
                                Eigen::VectorXd& estimates, Eigen::MatrixXd* stage_estimates) {
  if (ctx.spec.branch != Branch::full)
    throw std::invalid_argument("lockstep runner requires the full-quantum branch");
  const int batch = static_cast<int>(phi0.size());
  if (static_cast<int>(rngs.size()) != batch)
    throw std::invalid_argument("lockstep runner: rng/phase count mismatch");
  const MeasurementSchedule& sched = ctx.spec.schedule;
  const int d = ctx.prepared.dim();
  const auto& plan = detail::axis1_plan(ctx.spec.atom_count);
  if (stage_estimates) stage_estimates->setZero(sched.n, batch);

  Eigen::MatrixXcd states(d, batch);
  for (int b = 0; b < batch; ++b) states.col(b) = ctx.prepared.amplitudes;

  Eigen::VectorXd angles = -phi0;  // imprint
  detail::apply_axis1_batch(plan, angles, states);

  estimates.setZero(batch);
  for (int i = 1; i < sched.n; ++i) {
    const double omega = sched.omega(i - 1);
    for (int b = 0; b < batch; ++b) {
      const double outcome = detail::sample_weak_outcome_amps(ctx.spec.atom_count,
                                                              states.col(b), omega, rngs[b]);
      detail::apply_weak_outcome_amps(ctx.spec.atom_count, states.col(b), omega, outcome);
      const double est = -sched.beta[i - 1] * outcome / (omega * ctx.mean_jz0);
      estimates(b) += est;
      angles(b) = est;  // feedback: imprint(-est) = rotate by +est
      if (stage_estimates) (*stage_estimates)(i - 1, b) = est;
    }
    detail::apply_axis1_batch(plan, angles, states);
  }

  residuals.resize(batch);
  for (int b = 0; b < batch; ++b) {
    const double j3 =
        detail::projective_measure_amps(ctx.spec.atom_count, states.col(b), rngs[b]);
    const double est = sched.beta.back() * j3 / ctx.mean_jz0;
    estimates(b) += est;
    if (stage_estimates) (*stage_estimates)(sched.n - 1, b) = est;
    residuals(b) = phi0(b) - estimates(b);
  }
}

std::vector<double> calibrate_betas(const SequenceSpec& spec, int pilot_runs, Rng& rng) {
  check_spec(spec);
  if (pilot_runs < 1000)
    throw std::invalid_argument("calibrate_betas: need at least 1000 pilot runs");

  SequenceSpec work = spec;
  const int n = work.schedule.n;
  work.schedule.beta.assign(n, 1.0);
  const double phase_sd = std::sqrt(spec.gammaT);

  for (int stage = 1; stage <= n; ++stage) {
    SequenceContext ctx = make_sequence_context(work);
    const Rng pass_master = rng.derive(stage);
    double sum_r = 0.0, sum_y = 0.0, sum_ry = 0.0, sum_yy = 0.0;
    for (int r = 0; r < pilot_runs; ++r) {
      Rng run_rng = pass_master.derive(r);
      const double phi0 = phase_sd * run_rng.normal();

      // Stages before `stage` run with their calibrated gains.
      SpinStateVector state_full;
      EnsembleMoments state_gauss;
      const bool full = (work.branch == Branch::full);
      if (full)
        state_full = ctx.prepared;
      else
        state_gauss = ctx.prepared_moments;

      auto imprint = [&](double phi) {
        if (full)
          rotate_state_in_place(state_full, RotationAxis::axis1, -phi);
        else
          state_gauss = rotate_moments(state_gauss, RotationAxis::axis1, -phi);
      };

      imprint(phi0);
      double partial = 0.0;
      for (int i = 1; i < stage; ++i) {
        const double omega = work.schedule.omega(i - 1);
        double outcome;
        if (full) {
          outcome = sample_weak_outcome(state_full, omega, run_rng);
          apply_weak_outcome(state_full, omega, outcome);
        } else {
          outcome = sample_weak_outcome(state_gauss, omega, run_rng);
          apply_weak_outcome(state_gauss, omega, outcome);
        }
        const double est = -work.schedule.beta[i - 1] * outcome / (omega * ctx.mean_jz0);
        imprint(-est);
        partial += est;
      }

      // Raw (beta = 1) estimate of the stage being fitted.
      double raw;
      if (stage < n) {
        const double omega = work.schedule.omega(stage - 1);
        const double outcome = full ? sample_weak_outcome(state_full, omega, run_rng)
                                    : sample_weak_outcome(state_gauss, omega, run_rng);
        raw = -outcome / (omega * ctx.mean_jz0);
      } else {
        const double j3 = full ? projective_measure(state_full, run_rng)
                               : projective_measure(state_gauss, run_rng);
        raw = (work.protocol == ProtocolKind::conventional)
                  ? conventional_raw_estimate(j3, ctx.mean_jz0, work.estimator)
                  : j3 / ctx.mean_jz0;
      }

      const double resid = phi0 - partial;
      sum_r += resid;
      sum_y += raw;
      sum_ry += resid * raw;
      sum_yy += raw * raw;
    }
    const double inv = 1.0 / pilot_runs;
    const double cov = sum_ry * inv - (sum_r * inv) * (sum_y * inv);
    const double var = sum_yy * inv - (sum_y * inv) * (sum_y * inv);
    if (var <= 0.0) {
      std::cerr << "calibrate_betas: degenerate stage " << stage << " variance, using beta=0\n";
      work.schedule.beta[stage - 1] = 0.0;
    } else {
      work.schedule.beta[stage - 1] = cov / var;
    }
  }
  return work.schedule.beta;
}

void write_sequence_csv(const std::string& path, const SequenceResult& result) {
  CsvWriter csv(path);
  csv.meta("true_phase", result.true_phase);
  csv.meta("estimate", result.estimate);
  csv.meta("residual", result.residual);
  csv.meta("fringe_flagged", static_cast<long long>(result.fringe_flagged ? 1 : 0));
  csv.header({"stage", "omega", "outcome", "estimate", "residual"});
  double partial = result.true_phase;
  for (const auto& s : result.stages) {
    partial -= s.estimate.value;
    csv.row(std::vector<double>{static_cast<double>(s.record.stage), s.record.strength,
                                s.record.outcome, s.estimate.value, partial});
  }
}

}  // namespace qclock
