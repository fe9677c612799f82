#include "qclock/lo_noise.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "qclock/csv.hpp"

namespace qclock {

LOTrace gen_white_trace(double gammaT, int cycles, Rng& rng) {
  if (!(gammaT > 0.0)) throw std::domain_error("gen_white_trace: gammaT must be positive");
  if (cycles < 1) throw std::domain_error("gen_white_trace: cycles must be positive");
  LOTrace trace;
  trace.cycles = cycles;
  trace.ramsey_time = 1.0;
  trace.increments.resize(cycles);
  const double sd = std::sqrt(gammaT);
  for (int k = 0; k < cycles; ++k) trace.increments(k) = sd * rng.normal();
  return trace;
}

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

LOTrace gen_pink_trace(double gammaT, int cycles, int decades_below, Rng& rng) {
  if (cycles < 1) throw std::domain_error("gen_pink_trace: cycles must be positive");
  if (decades_below < 2) throw std::domain_error("gen_pink_trace: decades_below must be >= 2");

  // Internal units: T = 1, gamma = gammaT.
  const double t = 1.0;
  const double gamma = gammaT;
  const int sub = 8;  // sub-samples per Ramsey window
  const std::size_t warm = std::size_t{1} << decades_below;
  const std::size_t grid = next_pow2(warm * static_cast<std::size_t>(cycles) * sub);
  if (grid > (std::size_t{1} << 26))
    throw std::length_error("gen_pink_trace: requested length does not fit memory");

  const double dt = t / sub;
  const double duration = grid * dt;
  const double f_min = 1.0 / (static_cast<double>(warm) * cycles * t);
  const double f_max = 1.0 / (2.0 * t);

  // Hermitian spectrum with E|Y_j|^2 = M S(f_j)/dt inside the band.
  std::vector<std::complex<double>> spec(grid, {0.0, 0.0});
  for (std::size_t jbin = 1; jbin <= grid / 2; ++jbin) {
    const double f = jbin / duration;
    if (f < f_min || f > f_max) continue;
    const double s = gamma * gamma / f;
    const double amp = std::sqrt(grid * s / dt);
    if (jbin == grid / 2) {
      spec[jbin] = amp * rng.normal();
    } else {
      const std::complex<double> z(rng.normal(), rng.normal());
      spec[jbin] = amp * z / std::sqrt(2.0);
      spec[grid - jbin] = std::conj(spec[jbin]);
    }
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> time(grid);
  fft.inv(time, spec);  // includes the 1/M factor

  // Integrate the synthesized frequency over each window; keep the last
  // `cycles` windows so the low-frequency warm-up is discarded.
  LOTrace trace;
  trace.cycles = cycles;
  trace.ramsey_time = t;
  trace.increments.resize(cycles);
  const std::size_t total_windows = grid / sub;
  const std::size_t first = total_windows - cycles;
  for (int k = 0; k < cycles; ++k) {
    double acc = 0.0;
    const std::size_t base = (first + k) * sub;
    for (int i = 0; i < sub; ++i) acc += time[base + i].real();
    trace.increments(k) = acc * dt;
  }
  return trace;
}

Spectrum periodogram(const Eigen::VectorXd& series, double ramsey_time) {
  const int len = static_cast<int>(series.size());
  if (len < 16) throw std::domain_error("periodogram: need at least 16 samples");
  Eigen::FFT<double> fft;
  std::vector<double> in(series.data(), series.data() + len);
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);

  const int bins = len / 2;
  Spectrum spectrum;
  spectrum.frequency.resize(bins);
  spectrum.power.resize(bins);
  const double scale = ramsey_time / static_cast<double>(len);
  for (int jbin = 1; jbin <= bins; ++jbin) {
    spectrum.frequency(jbin - 1) = jbin / (len * ramsey_time);
    spectrum.power(jbin - 1) = scale * std::norm(out[jbin]);
  }
  return spectrum;
}

double integrated_power(const Spectrum& spectrum, int series_length, double ramsey_time) {
  const double df = 1.0 / (series_length * ramsey_time);
  double acc = 0.0;
  const int bins = static_cast<int>(spectrum.power.size());
  for (int i = 0; i < bins; ++i) {
    const bool nyquist = (series_length % 2 == 0) && (i == bins - 1);
    acc += spectrum.power(i) * (nyquist ? 1.0 : 2.0) * df;
  }
  return acc;
}

void write_trace_csv(const std::string& path, const LOTrace& trace) {
  CsvWriter csv(path);
  csv.meta("cycles", static_cast<long long>(trace.cycles));
  csv.meta("ramsey_time", trace.ramsey_time);
  csv.header({"index_or_frequency", "value"});
  for (int k = 0; k < trace.cycles; ++k)
    csv.row(std::vector<double>{static_cast<double>(k + 1), trace.increments(k)});
}

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum) {
  CsvWriter csv(path);
  csv.meta("bins", static_cast<long long>(spectrum.power.size()));
  csv.header({"index_or_frequency", "value"});
  for (int i = 0; i < spectrum.power.size(); ++i)
    csv.row(std::vector<double>{spectrum.frequency(i), spectrum.power(i)});
}

}  // namespace qclock
