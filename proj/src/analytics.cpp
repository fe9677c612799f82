#include "qclock/analytics.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "qclock/csv.hpp"
#include "qclock/quadrature.hpp"

namespace qclock {

namespace {

struct SurrogateMoments {
  double mean_z = 0.0;
  double sigma_u = 0.0;   // spread of 1 - J_z/<J_z>
  double var_x = 0.0;
  double var_y = 0.0;
};

SurrogateMoments surrogate(int atom_count, double kappa) {
  const EnsembleMoments m = gaussian_moments(atom_count, kappa);
  SurrogateMoments s;
  s.mean_z = m.mean_z();
  s.sigma_u = std::sqrt(std::max(0.0, m.var_z())) / m.mean_z();
  s.var_x = m.var_x();
  s.var_y = m.var_y();
  return s;
}

// E[w^p] for w ~ N(0, sigma^2): sigma^p (p-1)!! for even p, 0 for odd p.
double gaussian_power_moment(double sigma, int p) {
  if (p % 2 != 0) return 0.0;
  double log_acc = p * std::log(sigma);
  for (int k = 1; k < p; k += 2) log_acc += std::log(static_cast<double>(k));
  return p == 0 ? 1.0 : std::exp(log_acc);
}

// E[w^p (1-w)^q] for w ~ N(0, sigma_u^2), by 64-node Gauss-Hermite when the
// polynomial degree fits the rule, in closed form otherwise.
double atomic_factor(double sigma_u, int p, int q) {
  if (p < 0) throw std::domain_error("atomic_factor: negative power");
  if (p + q <= 126) {
    const auto& gh = gauss_hermite_64();
    return gh.expect([&](double w) { return std::pow(w, p) * std::pow(1.0 - w, q); }, 0.0,
                     sigma_u);
  }
  double acc = 0.0;
  for (int t = 0; t <= q; ++t) {
    const double binom = (q == 2) ? (t == 1 ? -2.0 : 1.0) : (t == 0 ? 1.0 : (q == 1 ? -1.0 : 0.0));
    acc += binom * gaussian_power_moment(sigma_u, p + t);
  }
  return acc;
}

struct PhaseFactors {
  double phi_sq;           // <phi^2>
  double phi_sin_minus;    // <phi (sin phi - phi)>
  double sin_minus_sq;     // <(sin phi - phi)^2>
  double sin_sq;           // <sin^2 phi>
};

PhaseFactors phase_factors(double gammaT) {
  const double sd = std::sqrt(gammaT);
  const auto& gh = gauss_hermite_64();
  PhaseFactors f;
  f.phi_sq = gh.expect([](double p) { return p * p; }, 0.0, sd);
  f.phi_sin_minus = gh.expect([](double p) { return p * (std::sin(p) - p); }, 0.0, sd);
  f.sin_minus_sq = gh.expect(
      [](double p) {
        const double d = std::sin(p) - p;
        return d * d;
      },
      0.0, sd);
  f.sin_sq = gh.expect([](double p) { const double s = std::sin(p); return s * s; }, 0.0, sd);
  return f;
}

}  // namespace

std::array<double, 3> jz_noise_terms(int atom_count, double kappa, int n, double gammaT) {
  if (n < 1) throw std::domain_error("jz_noise_terms: n >= 1 required");
  const SurrogateMoments s = surrogate(atom_count, kappa);
  const PhaseFactors f = phase_factors(gammaT);
  std::array<double, 3> terms;
  terms[0] = f.phi_sq * atomic_factor(s.sigma_u, 2 * n, 0);
  terms[1] = 2.0 * f.phi_sin_minus * atomic_factor(s.sigma_u, 2 * n - 1, 1);
  terms[2] = f.sin_minus_sq * atomic_factor(s.sigma_u, 2 * n - 2, 2);
  // Each term is nonnegative by construction; clamp quadrature roundoff.
  for (double& t : terms) t = std::max(0.0, t);
  return terms;
}

Eigen::VectorXd backaction_terms(int atom_count, double kappa, int n,
                                 const Eigen::VectorXd& omega, double gammaT) {
  if (omega.size() != n - 1)
    throw std::invalid_argument("backaction_terms: omega must have n-1 entries");
  const SurrogateMoments s = surrogate(atom_count, kappa);
  const PhaseFactors f = phase_factors(gammaT);
  const double mz2 = s.mean_z * s.mean_z;
  const auto& gh = gauss_hermite_64();
  const double sigma_x = std::sqrt(s.var_x);

  Eigen::VectorXd out(n - 1);
  for (int i = 1; i <= n - 1; ++i) {
    // Tensorized expectation over the independent pair (w, J_x).
    const int p = (i == 1) ? 2 : 2 * i - 2;
    const int q = (i == 1) ? 0 : 2;
    double atomic = 0.0;
    if (p + q <= 126) {
      for (int a = 0; a < gh.nodes.size(); ++a) {
        const double w = s.sigma_u * gh.nodes(a);
        const double fw = std::pow(w, p) * (q == 0 ? 1.0 : (1.0 - w) * (1.0 - w));
        double inner = 0.0;
        for (int b = 0; b < gh.nodes.size(); ++b) {
          const double jx = sigma_x * gh.nodes(b);
          inner += gh.weights(b) * jx * jx;
        }
        atomic += gh.weights(a) * fw * inner;
      }
    } else {
      atomic = atomic_factor(s.sigma_u, p, q) * s.var_x;
    }
    const double phase = (i == 1) ? f.sin_sq : f.sin_minus_sq;
    out(i - 1) = std::max(0.0, 0.5 * phase * atomic / mz2 * omega(i - 1) * omega(i - 1));
  }
  return out;
}

Eigen::VectorXd probe_noise_terms(int atom_count, double kappa, int n,
                                  const Eigen::VectorXd& omega) {
  if (omega.size() != n - 1)
    throw std::invalid_argument("probe_noise_terms: omega must have n-1 entries");
  const SurrogateMoments s = surrogate(atom_count, kappa);
  const double mz2 = s.mean_z * s.mean_z;
  Eigen::VectorXd out(n - 1);
  for (int i = 1; i <= n - 1; ++i) {
    if (!(omega(i - 1) > 0.0))
      throw std::domain_error("probe_noise_terms: Omega_i must be positive");
    out(i - 1) =
        atomic_factor(s.sigma_u, 2 * (n - i), 0) * 0.5 / (mz2 * omega(i - 1) * omega(i - 1));
  }
  return out;
}

AnalyticTermReport analytic_report(int atom_count, double kappa, int n,
                                   const Eigen::VectorXd& omega, double gammaT) {
  AnalyticTermReport report;
  report.jz_terms = jz_noise_terms(atom_count, kappa, n, gammaT);
  report.backaction_terms = backaction_terms(atom_count, kappa, n, omega, gammaT);
  report.probe_terms = probe_noise_terms(atom_count, kappa, n, omega);
  const SurrogateMoments s = surrogate(atom_count, kappa);
  report.jy_floor = s.var_y / (s.mean_z * s.mean_z);
  report.total = report.jz_terms[0] + report.jz_terms[1] + report.jz_terms[2] +
                 report.backaction_terms.sum() + report.probe_terms.sum() + report.jy_floor;
  return report;
}

double stability_upper_bound(double atom_count, double gammaT) {
  if (atom_count < 100.0) throw std::domain_error("stability_upper_bound: N >= 100 required");
  return (2.0 / atom_count + std::log(std::sqrt(atom_count)) / atom_count) / std::sqrt(gammaT);
}

double sigma_max(double a, double l) {
  if (!(a > 0.0)) throw std::domain_error("sigma_max: a must be positive");
  if (l < 10.0) throw std::domain_error("sigma_max: l >= 10 required");
  const double inner = std::log(2.0 / M_PI) + 2.0 * std::log(l) - 2.0 * std::log(std::log(2.0));
  if (inner <= 0.0) throw std::domain_error("sigma_max: log argument not positive");
  const double denom = inner - std::log(inner);
  if (denom <= 0.0) throw std::domain_error("sigma_max: expansion invalid for this l");
  return a / std::sqrt(denom);
}

double sigma_max_defining_probability(double a, double sigma, double l) {
  const double tail = std::erfc(a / (std::sqrt(2.0) * sigma));
  if (tail >= 1.0) return 0.0;
  return std::exp(l * std::log1p(-tail));
}

ReferenceLimits reference_limits(double atom_count, double gammaT) {
  if (atom_count < 1.0) throw std::domain_error("reference_limits: N >= 1 required");
  const double root = std::sqrt(gammaT);
  ReferenceLimits limits;
  limits.sql = 1.0 / (std::sqrt(atom_count) * root);
  limits.heisenberg = 1.0 / (atom_count * root);
  limits.andre = std::pow(atom_count, -2.0 / 3.0) / root;
  return limits;
}

namespace {
std::mutex nmax_mutex;
std::map<std::pair<int, long long>, int> nmax_cache;
}  // namespace

int locate_n_max(int atom_count, double kappa) {
  const auto key = std::make_pair(atom_count, static_cast<long long>(kappa * 1e9));
  {
    std::lock_guard lock(nmax_mutex);
    auto it = nmax_cache.find(key);
    if (it != nmax_cache.end()) return it->second;
  }
  const SurrogateMoments s = surrogate(atom_count, kappa);
  const double log_s2 = 2.0 * std::log(s.sigma_u);
  // log E[w^{2k}] = k log sigma^2 + log (2k-1)!!; term3(n) = M_{2n-2} + M_{2n}.
  auto log_moment = [&](int k) {
    double acc = k * log_s2;
    for (int t = 1; t < 2 * k; t += 2) acc += std::log(static_cast<double>(t));
    return acc;
  };
  int best_n = 1;
  double best = 1e300;
  int rising = 0;
  for (int n = 1; n <= 4000; ++n) {
    const double v = (n == 1 ? 1.0 : std::exp(log_moment(n - 1))) + std::exp(log_moment(n));
    if (v < best) {
      best = v;
      best_n = n;
      rising = 0;
    } else if (++rising > 8) {
      break;
    }
  }
  std::lock_guard lock(nmax_mutex);
  nmax_cache[key] = best_n;
  return best_n;
}

namespace {

struct Candidate {
  double kappa = 0.0;
  int n = 1;
  double gammaT = 0.1;
  double omega_scale = 1.0;

  bool operator<(const Candidate& o) const {
    return std::tie(kappa, n, gammaT, omega_scale) <
           std::tie(o.kappa, o.n, o.gammaT, o.omega_scale);
  }
};

MeasurementSchedule schedule_for(int atom_count, ProtocolKind protocol, const Candidate& c) {
  MeasurementSchedule s;
  s.kappa = c.kappa;
  s.n = (protocol == ProtocolKind::conventional) ? 1 : c.n;
  s.omega.resize(s.n - 1);
  const double n_d = static_cast<double>(atom_count);
  for (int i = 1; i < s.n; ++i)
    s.omega(i - 1) =
        c.omega_scale * std::pow(n_d, -1.0 + static_cast<double>(i) / (s.n + 1));
  s.beta.assign(s.n, 1.0);
  return s;
}

}  // namespace

OptimizationResult optimize_stability(int atom_count, NoiseKind noise, ProtocolKind protocol,
                                      Branch branch, const OptimizeOptions& options,
                                      const Rng& master) {
  if (options.budget < 50) throw std::invalid_argument("optimize_stability: budget >= 50");

  OptimizeOptions opt = options;
  const double n_d = static_cast<double>(atom_count);
  if (opt.kappa_grid.empty()) {
    const double lo = 1.5, hi = std::sqrt(n_d);
    const int points = 12;
    for (int i = 0; i < points; ++i)
      opt.kappa_grid.push_back(lo * std::pow(hi / lo, i / static_cast<double>(points - 1)));
  }
  if (opt.n_grid.empty()) {
    const int n0 = static_cast<int>(std::ceil(3.0 * std::log(n_d)));
    for (int n = std::max(2, n0 - 8); n <= n0 + 8; n += 2) opt.n_grid.push_back(n);
  }
  if (opt.gammaT_grid.empty())
    for (double g = 0.05; g <= 0.451; g += 0.05) opt.gammaT_grid.push_back(g);
  if (opt.omega_scale_grid.empty()) opt.omega_scale_grid = {0.5, 0.71, 1.0, 1.41, 2.0};

  const Rng pilot_master = master.derive(1);
  const Rng eval_master = master.derive(2);  // common random numbers across candidates

  std::map<Candidate, std::pair<double, double>> seen;
  int evals = 0;
  bool exhausted_mid_sweep = false;

  auto evaluate = [&](const Candidate& c) -> std::pair<double, double> {
    auto it = seen.find(c);
    if (it != seen.end()) return it->second;
    ++evals;
    SequenceSpec spec;
    spec.atom_count = atom_count;
    spec.protocol = protocol;
    spec.branch = branch;
    spec.estimator = opt.estimator;
    spec.schedule = schedule_for(atom_count, protocol, c);
    spec.gammaT = c.gammaT;
    Rng pilot = pilot_master;
    spec.schedule.beta = calibrate_betas(spec, opt.pilot_runs, pilot);

    EnsembleStats stats;
    if (noise == NoiseKind::white) {
      stats = sequence_stability(spec, c.gammaT, opt.runs_per_eval, eval_master, opt.workers);
    } else {
      ClockConfig config;
      config.atom_count = atom_count;
      config.schedule = spec.schedule;
      config.protocol = protocol;
      config.branch = branch;
      config.estimator = opt.estimator;
      config.noise = NoiseModel{NoiseKind::pink, c.gammaT, 4};
      config.gammaT = c.gammaT;
      config.alpha = opt.alpha;
      config.cycles = opt.loop_cycles;
      stats = clock_stability(config, opt.loop_runs, eval_master, opt.workers);
    }
    const auto value = std::make_pair(stats.sigma_gamma, stats.sigma_err);
    seen.emplace(c, value);
    return value;
  };

  auto nearest_index = [](const std::vector<double>& grid, double v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (std::abs(grid[i] - v) < std::abs(grid[best] - v)) best = i;
    return best;
  };

  Candidate current;
  const MeasurementSchedule start = (protocol == ProtocolKind::conventional)
                                        ? schedule_for(atom_count, protocol,
                                                       {std::cbrt(n_d), 1, opt.gammaT_grid[1], 1.0})
                                        : default_schedule(atom_count);
  current.kappa = opt.kappa_grid[nearest_index(opt.kappa_grid, start.kappa)];
  current.n = start.n;
  if (protocol == ProtocolKind::adaptive) {
    int best = opt.n_grid[0];
    for (int n : opt.n_grid)
      if (std::abs(n - start.n) < std::abs(best - start.n)) best = n;
    current.n = best;
  }
  current.gammaT = opt.gammaT_grid[nearest_index(opt.gammaT_grid, 0.1)];
  current.omega_scale = 1.0;

  auto current_value = evaluate(current);
  Candidate best_c = current;
  auto best_v = current_value;

  const int axes = (protocol == ProtocolKind::conventional) ? 2 : 4;
  bool moved = true;
  int sweep = 0;
  while (moved && evals < opt.budget) {
    moved = false;
    for (int axis = 0; axis < axes && evals < opt.budget; ++axis) {
      // axis order: kappa, gammaT, n, omega_scale
      for (int dir : {-1, +1}) {
        for (;;) {
          if (evals >= opt.budget) {
            if (sweep == 0) exhausted_mid_sweep = true;
            break;
          }
          Candidate next = current;
          bool valid = true;
          if (axis == 0) {
            const auto idx = nearest_index(opt.kappa_grid, current.kappa);
            const long long j = static_cast<long long>(idx) + dir;
            valid = j >= 0 && j < static_cast<long long>(opt.kappa_grid.size());
            if (valid) next.kappa = opt.kappa_grid[j];
          } else if (axis == 1) {
            const auto idx = nearest_index(opt.gammaT_grid, current.gammaT);
            const long long j = static_cast<long long>(idx) + dir;
            valid = j >= 0 && j < static_cast<long long>(opt.gammaT_grid.size());
            if (valid) next.gammaT = opt.gammaT_grid[j];
          } else if (axis == 2) {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < opt.n_grid.size(); ++i)
              if (opt.n_grid[i] == current.n) idx = i;
            const long long j = static_cast<long long>(idx) + dir;
            valid = j >= 0 && j < static_cast<long long>(opt.n_grid.size());
            if (valid) next.n = opt.n_grid[j];
          } else {
            const auto idx = nearest_index(opt.omega_scale_grid, current.omega_scale);
            const long long j = static_cast<long long>(idx) + dir;
            valid = j >= 0 && j < static_cast<long long>(opt.omega_scale_grid.size());
            if (valid) next.omega_scale = opt.omega_scale_grid[j];
          }
          if (!valid || !(next < current || current < next)) break;
          const auto v = evaluate(next);
          if (v.first < current_value.first) {
            current = next;
            current_value = v;
            moved = true;
            if (v.first < best_v.first) {
              best_c = next;
              best_v = v;
            }
          } else {
            break;
          }
        }
      }
    }
    ++sweep;
  }
  if (exhausted_mid_sweep)
    std::cerr << "optimize_stability: budget exhausted before one full sweep\n";

  OptimizationResult result;
  result.schedule = schedule_for(atom_count, protocol, best_c);
  {
    SequenceSpec spec;
    spec.atom_count = atom_count;
    spec.protocol = protocol;
    spec.branch = branch;
    spec.estimator = opt.estimator;
    spec.schedule = result.schedule;
    spec.gammaT = best_c.gammaT;
    Rng pilot = pilot_master;
    result.schedule.beta = calibrate_betas(spec, opt.pilot_runs, pilot);
  }
  result.gammaT = best_c.gammaT;
  result.sigma = best_v.first;
  result.sigma_err = best_v.second;
  result.evaluations = evals;
  result.budget_exhausted_mid_sweep = exhausted_mid_sweep;
  return result;
}

void write_term_report_csv(const std::string& path, const AnalyticTermReport& report) {
  CsvWriter csv(path);
  csv.header({"term", "stage", "value"});
  for (int i = 0; i < 3; ++i)
    csv.row({std::string("jz") + std::to_string(i + 1), "0", csv_format(report.jz_terms[i])});
  for (int i = 0; i < report.backaction_terms.size(); ++i)
    csv.row({"backaction", std::to_string(i + 1), csv_format(report.backaction_terms(i))});
  for (int i = 0; i < report.probe_terms.size(); ++i)
    csv.row({"probe", std::to_string(i + 1), csv_format(report.probe_terms(i))});
  csv.row({"jy_floor", "0", csv_format(report.jy_floor)});
  csv.row({"total", "0", csv_format(report.total)});
}

std::string summarize(const OptimizationResult& result) {
  std::ostringstream os;
  os << "best sigma_gamma = " << result.sigma << " +/- " << result.sigma_err << "\n"
     << "kappa = " << result.schedule.kappa << ", n = " << result.schedule.n
     << ", gammaT = " << result.gammaT << ", evaluations = " << result.evaluations << "\n";
  os << "omega =";
  for (int i = 0; i < result.schedule.omega.size(); ++i) os << " " << result.schedule.omega(i);
  os << "\nbeta =";
  for (double b : result.schedule.beta) os << " " << b;
  os << "\n";
  if (result.budget_exhausted_mid_sweep) os << "warning: budget exhausted before one full sweep\n";
  return os.str();
}

}  // namespace qclock
