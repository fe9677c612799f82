#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qclock/measurement.hpp"
#include "qclock/moments.hpp"
#include "qclock/rng.hpp"
#include "qclock/spin_state.hpp"

namespace qclock {

enum class Branch { full, gaussian };
enum class ProtocolKind { adaptive, conventional };

// The conventional reference protocol admits two estimator forms: the plain
// linear gain beta*J3/<J_z>, and the sine-inverted variant
// beta*asin(J3/<J_z>) that undoes the deterministic fringe distortion.  The
// reference stability curves use the sine-inverted form.
enum class ConventionalEstimator { linear, sine_inverted };

// n measurements total: n-1 weak stages with strengths omega, then the final
// projective stage.  beta has one gain per measurement.
struct MeasurementSchedule {
  double kappa = 1.0;
  int n = 1;
  Eigen::VectorXd omega;      // length n-1
  std::vector<double> beta;   // length n

  bool shape_ok() const {
    return n >= 1 && omega.size() == n - 1 && static_cast<int>(beta.size()) == n;
  }
};

// Heuristic near-optimal operating point: kappa = ln(sqrt(N)) + 2,
// n = ceil(3 ln N), Omega_i = N^{-1 + i/(n+1)}; beta starts at 1 pending
// calibration.  Requires N >= 100.
MeasurementSchedule default_schedule(int atom_count);

struct SequenceSpec {
  int atom_count = 1000;
  ProtocolKind protocol = ProtocolKind::adaptive;
  Branch branch = Branch::gaussian;
  MeasurementSchedule schedule;
  ConventionalEstimator estimator = ConventionalEstimator::linear;
  double gammaT = 0.1;  // free-running phase variance per cycle; used for calibration draws
};

struct StageRecord {
  WeakMeasurementRecord record;  // projective stage: strength 0, outcome = measured J3
  PhaseEstimate estimate;
};

struct SequenceResult {
  double true_phase = 0.0;
  double estimate = 0.0;  // sum of stage estimates
  double residual = 0.0;  // true_phase - estimate, exactly
  bool fringe_flagged = false;
  std::vector<StageRecord> stages;
};

struct SequenceOptions {
  bool record_stages = false;
};

// Prepared-state cache so ensembles do not rebuild |psi(kappa)> per run.
struct SequenceContext {
  SequenceSpec spec;
  double mean_jz0 = 0.0;
  SpinStateVector prepared;          // full branch
  EnsembleMoments prepared_moments;  // gaussian branch
};

SequenceContext make_sequence_context(const SequenceSpec& spec);

SequenceResult run_sequence(const SequenceContext& ctx, double phi0, Rng& rng,
                            const SequenceOptions& options = {});
SequenceResult run_sequence(const SequenceSpec& spec, double phi0, Rng& rng,
                            const SequenceOptions& options = {});

// One full Ramsey interrogation of the adaptive protocol: imprint phi0, n-1
// weak measurements with immediate counter-rotations by the stage estimates,
// final projective measurement.
SequenceResult run_adaptive_sequence(int atom_count, const MeasurementSchedule& schedule,
                                     double phi0, Branch branch, Rng& rng,
                                     const SequenceOptions& options = {});

// Single projective measurement after the Ramsey time.
SequenceResult run_conventional_ramsey(int atom_count, double kappa, double beta, double phi0,
                                       Branch branch, Rng& rng,
                                       ConventionalEstimator estimator = ConventionalEstimator::linear,
                                       const SequenceOptions& options = {});

// Lockstep ensemble for the full-quantum branch; column b evolves with
// rngs[b] and the same draw order as run_sequence, so results are identical
// to the one-at-a-time path.  When stage_estimates is non-null it receives
// the per-stage estimates as an n x batch matrix.
void run_adaptive_full_lockstep(const SequenceContext& ctx, const Eigen::VectorXd& phi0,
                                std::vector<Rng>& rngs, Eigen::VectorXd& residuals,
                                Eigen::VectorXd& estimates,
                                Eigen::MatrixXd* stage_estimates = nullptr);

void write_sequence_csv(const std::string& path, const SequenceResult& result);

inline const char* to_string(Branch b) { return b == Branch::full ? "full" : "gaussian"; }
inline const char* to_string(ProtocolKind p) {
  return p == ProtocolKind::adaptive ? "adaptive" : "conventional";
}
inline const char* to_string(ConventionalEstimator e) {
  return e == ConventionalEstimator::linear ? "linear" : "sine-inverted";
}

}  // namespace qclock
