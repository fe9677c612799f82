#pragma once

#include <Eigen/Dense>
#include <string>

#include "qclock/rng.hpp"

namespace qclock {

enum class NoiseKind { white, pink };

// gamma is the linewidth-like fluctuation parameter of the free-running LO:
// white frequency noise has S(f) = gamma, 1/f noise S(f) = gamma^2 / f.
struct NoiseModel {
  NoiseKind kind = NoiseKind::white;
  double gamma = 1.0;
  int decades_below = 4;  // pink low-frequency cutoff 2^decades_below under the band
};

// Per-cycle free-running phase increments dphi0(t_k), k = 1..cycles.  Times
// are nondimensionalized by the Ramsey window (T = 1 internally), so only
// the product gamma*T enters.
struct LOTrace {
  int cycles = 0;
  double ramsey_time = 1.0;
  Eigen::VectorXd increments;
};

// i.i.d. zero-mean Gaussian increments with variance gammaT.
LOTrace gen_white_trace(double gammaT, int cycles, Rng& rng);

// Spectral synthesis of 1/f frequency noise with S(f) = gamma^2/f between
// f_min = 1/(2^decades_below * cycles * T) and f_max = 1/(2T), integrated
// over each Ramsey window (>= 8 sub-samples per window); the warm-up prefix
// is discarded and the last `cycles` increments are returned.
LOTrace gen_pink_trace(double gammaT, int cycles, int decades_below, Rng& rng);

struct Spectrum {
  Eigen::VectorXd frequency;
  Eigen::VectorXd power;
};

// Power spectral density of a per-cycle frequency series sampled at interval
// T, normalized so white frequency noise of per-cycle variance gamma/T gives
// a plateau at gamma.  Bins j = 1..len/2 are returned (two-sided level shown
// on positive frequencies).
Spectrum periodogram(const Eigen::VectorXd& series, double ramsey_time);

// Sum of the two-sided spectral mass implied by a periodogram of a series of
// length `series_length`; equals the series mean square minus the DC part.
double integrated_power(const Spectrum& spectrum, int series_length, double ramsey_time);

void write_trace_csv(const std::string& path, const LOTrace& trace);
void write_spectrum_csv(const std::string& path, const Spectrum& spectrum);

}  // namespace qclock
