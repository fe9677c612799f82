#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qclock/lo_noise.hpp"
#include "qclock/stats.hpp"

using namespace qclock;

namespace {

// Averaged periodogram of the per-cycle frequency series over independent
// seeds; shared by the slope checks.
Eigen::VectorXd averaged_pink_periodogram(int seeds, int cycles, int decades, double gammaT,
                                          Eigen::VectorXd& freq) {
  Rng master(2024);
  Eigen::VectorXd avg;
  for (int s = 0; s < seeds; ++s) {
    Rng rng = master.derive(s);
    const LOTrace trace = gen_pink_trace(gammaT, cycles, decades, rng);
    const Spectrum sp = periodogram(trace.increments / trace.ramsey_time, trace.ramsey_time);
    if (avg.size() == 0) {
      avg = sp.power;
      freq = sp.frequency;
    } else {
      avg += sp.power;
    }
  }
  return avg / seeds;
}

double loglog_slope_central_two_decades(const Eigen::VectorXd& freq, const Eigen::VectorXd& power) {
  const double lo = std::log10(freq(0)), hi = std::log10(freq(freq.size() - 1));
  const double mid = 0.5 * (lo + hi);
  std::vector<double> xs, ys;
  for (int i = 0; i < freq.size(); ++i) {
    const double lf = std::log10(freq(i));
    if (lf >= mid - 1.0 && lf <= mid + 1.0) {
      xs.push_back(freq(i));
      ys.push_back(power(i));
    }
  }
  return fit_loglog(xs, ys).slope;
}

}  // namespace

TEST_CASE("white trace: sample variance within the 2-sigma band at l = 10^6") {
  Rng rng(1);
  const LOTrace trace = gen_white_trace(0.1, 1000000, rng);
  RunningStats stats;
  for (int k = 0; k < trace.cycles; ++k) stats.add(trace.increments(k) * trace.increments(k));
  CHECK(stats.mean() > 0.0994);
  CHECK(stats.mean() < 0.1006);
  RunningStats mean_stats;
  for (int k = 0; k < trace.cycles; ++k) mean_stats.add(trace.increments(k));
  CHECK(std::abs(mean_stats.mean()) < 5.0 * std::sqrt(0.1 / trace.cycles));
}

TEST_CASE("white trace: vanishing-noise limit") {
  Rng rng(2);
  const LOTrace trace = gen_white_trace(1e-12, 100000, rng);
  CHECK(trace.increments.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("white trace: fixed seed gives a bit-identical trace") {
  Rng a(42), b(42);
  const LOTrace ta = gen_white_trace(0.2, 4096, a);
  const LOTrace tb = gen_white_trace(0.2, 4096, b);
  CHECK((ta.increments - tb.increments).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("white trace: lag-1..10 autocorrelations stay below 4/sqrt(l)") {
  Rng rng(7);
  const int l = 1 << 16;
  const LOTrace trace = gen_white_trace(0.3, l, rng);
  const double mean = trace.increments.mean();
  double c0 = 0.0;
  for (int k = 0; k < l; ++k) {
    const double a = trace.increments(k) - mean;
    c0 += a * a;
  }
  for (int lag = 1; lag <= 10; ++lag) {
    double c = 0.0;
    for (int k = lag; k < l; ++k)
      c += (trace.increments(k) - mean) * (trace.increments(k - lag) - mean);
    CHECK(std::abs(c / c0) < 4.0 / std::sqrt(static_cast<double>(l)));
  }
}

TEST_CASE("white trace rejects bad domains") {
  Rng rng(3);
  CHECK_THROWS_AS(gen_white_trace(0.0, 100, rng), std::domain_error);
  CHECK_THROWS_AS(gen_white_trace(0.1, 0, rng), std::domain_error);
}

TEST_CASE("pink trace: periodogram slope -1.0 +/- 0.1 over the central two decades") {
  Eigen::VectorXd freq;
  const Eigen::VectorXd avg = averaged_pink_periodogram(100, 16384, 4, 0.1, freq);
  const double slope = loglog_slope_central_two_decades(freq, avg);
  CHECK(slope > -1.1);
  CHECK(slope < -0.9);
}

TEST_CASE("pink trace: zero amplitude gives an all-zero trace") {
  Rng rng(5);
  const LOTrace trace = gen_pink_trace(0.0, 1024, 4, rng);
  CHECK(trace.increments.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pink trace: adjacent cycles are positively correlated (5 sigma over 100 seeds)") {
  Rng master(6);
  RunningStats rho;
  for (int s = 0; s < 100; ++s) {
    Rng rng = master.derive(s);
    const LOTrace trace = gen_pink_trace(0.1, 16384, 4, rng);
    const double mean = trace.increments.mean();
    double c0 = 0.0, c1 = 0.0;
    for (int k = 0; k < trace.cycles; ++k) {
      const double a = trace.increments(k) - mean;
      c0 += a * a;
      if (k > 0) c1 += a * (trace.increments(k - 1) - mean);
    }
    rho.add(c1 / c0);
  }
  CHECK(rho.mean() > 0.0);
  CHECK(rho.mean() / rho.stderr_mean() > 5.0);
}

TEST_CASE("pink trace: length/decade domain checks") {
  Rng rng(8);
  CHECK_THROWS_AS(gen_pink_trace(0.1, 1024, 1, rng), std::domain_error);
  CHECK_THROWS_AS(gen_pink_trace(0.1, 1 << 24, 8, rng), std::length_error);
  // determinism
  Rng a(9), b(9);
  const LOTrace ta = gen_pink_trace(0.1, 512, 4, a);
  const LOTrace tb = gen_pink_trace(0.1, 512, 4, b);
  CHECK((ta.increments - tb.increments).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("periodogram: white frequency noise of variance gamma/T plateaus at gamma") {
  Rng master(10);
  const int l = 4096;
  Eigen::VectorXd avg;
  for (int s = 0; s < 200; ++s) {
    Rng rng = master.derive(s);
    const LOTrace trace = gen_white_trace(1.0, l, rng);  // phase variance gammaT = 1
    const Spectrum sp = periodogram(trace.increments / trace.ramsey_time, trace.ramsey_time);
    if (avg.size() == 0)
      avg = sp.power;
    else
      avg += sp.power;
  }
  avg /= 200.0;
  const double plateau = avg.mean();
  CHECK(plateau == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("periodogram: zero input, short input, pink consistency") {
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(64);
  const Spectrum sp = periodogram(zeros, 1.0);
  CHECK(sp.power.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd tiny = Eigen::VectorXd::Zero(8);
  CHECK_THROWS_AS(periodogram(tiny, 1.0), std::domain_error);
}

TEST_CASE("Parseval: mean square equals the integrated periodogram to 0.5%") {
  Rng rng(12);
  SUBCASE("white") {
    const LOTrace trace = gen_white_trace(0.7, 8192, rng);
    const Spectrum sp = periodogram(trace.increments, 1.0);
    const double ms = trace.increments.squaredNorm() / trace.cycles;
    const double mean = trace.increments.mean();
    const double integral = integrated_power(sp, trace.cycles, 1.0) + mean * mean;
    CHECK(integral == doctest::Approx(ms).epsilon(0.005));
  }
  SUBCASE("pink") {
    const LOTrace trace = gen_pink_trace(0.2, 8192, 4, rng);
    const Spectrum sp = periodogram(trace.increments, 1.0);
    const double ms = trace.increments.squaredNorm() / trace.cycles;
    const double mean = trace.increments.mean();
    const double integral = integrated_power(sp, trace.cycles, 1.0) + mean * mean;
    CHECK(integral == doctest::Approx(ms).epsilon(0.005));
  }
}
