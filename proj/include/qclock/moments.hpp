#pragma once

#include <Eigen/Dense>

#include "qclock/spin_state.hpp"

namespace qclock {

// First and second moments of (J_x, J_y, J_z), in hbar = 1 units.
// Component order throughout is (x, y, z).
struct EnsembleMoments {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();

  double mean_x() const { return mean(0); }
  double mean_y() const { return mean(1); }
  double mean_z() const { return mean(2); }
  double var_x() const { return cov(0, 0); }
  double var_y() const { return cov(1, 1); }
  double var_z() const { return cov(2, 2); }
  double cov_xy() const { return cov(0, 1); }
  double cov_xz() const { return cov(0, 2); }
  double cov_yz() const { return cov(1, 2); }

  double second_moment_x() const { return var_x() + mean_x() * mean_x(); }
  double second_moment_y() const { return var_y() + mean_y() * mean_y(); }
  double second_moment_z() const { return var_z() + mean_z() * mean_z(); }
};

// Exact moments from ladder matrix elements; valid for any normalized state.
EnsembleMoments exact_moments(const SpinStateVector& state);

// Continuum (integral) approximation of the |psi(kappa)> moments, valid for
// N >> 1.  Requires N >= 100 and kappa >= 1.
EnsembleMoments gaussian_moments(int atom_count, double kappa);

// Classical SO(3) image of exp(-i angle J_axis): moments of a rotated state
// are R * mean and R * cov * R^T.
Eigen::Matrix3d classical_rotation(RotationAxis axis, double angle);

EnsembleMoments rotate_moments(const EnsembleMoments& moments, RotationAxis axis, double angle);

}  // namespace qclock
