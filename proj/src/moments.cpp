#include "qclock/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "qclock/quadrature.hpp"

namespace qclock {

EnsembleMoments exact_moments(const SpinStateVector& state) {
  const int d = state.dim();
  Eigen::VectorXcd vx(d), vy(d), vz(d);
  detail::apply_jx(state.atom_count, state.amplitudes, vx);
  detail::apply_jy(state.atom_count, state.amplitudes, vy);
  detail::apply_jz(state.atom_count, state.amplitudes, vz);

  const Eigen::VectorXcd* ops[3] = {&vx, &vy, &vz};
  EnsembleMoments out;
  for (int i = 0; i < 3; ++i) out.mean(i) = state.amplitudes.dot(*ops[i]).real();
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      // Re<J_i c | J_j c> is the symmetrized second moment.
      const double second = ops[i]->dot(*ops[j]).real();
      out.cov(i, j) = out.cov(j, i) = second - out.mean(i) * out.mean(j);
    }
  return out;
}

EnsembleMoments gaussian_moments(int atom_count, double kappa) {
  if (atom_count < 100)
    throw std::domain_error("gaussian_moments: requires N >= 100");
  if (atom_count % 2 != 0)
    throw std::domain_error("gaussian_moments: atom count must be even");
  if (!(kappa >= 1.0))
    throw std::domain_error("gaussian_moments: requires kappa >= 1");

  const double j = 0.5 * atom_count;
  const double a2 = (j + 0.5) * (j + 0.5);  // (J + 1/2)^2
  const double sigma = 0.5 * kappa;          // |c_m|^2 has variance kappa^2/4
  const double sigma2 = sigma * sigma;
  const double inv_norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
  const double half_width = std::min(12.0 * sigma, std::sqrt(a2) - 1.0);

  auto gauss = [&](double u) { return inv_norm * std::exp(-0.5 * u * u / sigma2); };

  // <J_z> = e^{-1/(2k^2)} E_u[ sqrt(A - u^2) ], u ~ N(0, k^2/4).
  const double ez_scaled = integrate(
      [&](double u) { return std::sqrt(std::max(0.0, 1.0 - u * u / a2)) * gauss(u); },
      -half_width, half_width, 1e-12);
  const double mean_z = std::exp(-0.5 / (kappa * kappa)) * std::sqrt(a2) * ez_scaled;

  // <J_z^2> +/- split: the diagonal ladder part is an exact Gaussian moment,
  // the m -> m+2 coherence part is quadrature over u = m + 1.
  const double term1 = 0.5 * (a2 - sigma2 - 0.25);
  const double term2_scaled = integrate(
      [&](double u) {
        const double p = (1.0 - (u + 0.5) * (u + 0.5) / a2) * (1.0 - (u - 0.5) * (u - 0.5) / a2);
        return std::sqrt(std::max(0.0, p)) * gauss(u);
      },
      -half_width, half_width, 1e-12);
  const double term2 = 0.5 * std::exp(-2.0 / (kappa * kappa)) * a2 * term2_scaled;

  EnsembleMoments out;
  out.mean << 0.0, 0.0, mean_z;
  out.cov.setZero();
  out.cov(0, 0) = term1 - term2;                    // <J_x^2>, mean_x = 0
  out.cov(1, 1) = sigma2;                           // squeezed variance kappa^2/4
  out.cov(2, 2) = term1 + term2 - mean_z * mean_z;  // banana spread
  return out;
}

Eigen::Matrix3d classical_rotation(RotationAxis axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d r;
  if (axis == RotationAxis::axis1) {
    r << 1, 0, 0,
         0, c, -s,
         0, s, c;
  } else {
    r << c, 0, s,
         0, 1, 0,
        -s, 0, c;
  }
  return r;
}

EnsembleMoments rotate_moments(const EnsembleMoments& moments, RotationAxis axis, double angle) {
  const Eigen::Matrix3d r = classical_rotation(axis, angle);
  EnsembleMoments out;
  out.mean = r * moments.mean;
  out.cov = r * moments.cov * r.transpose();
  return out;
}

}  // namespace qclock
