#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qclock {

// Collective spin J = N/2 of N two-level atoms, stored as the amplitude
// vector over J_y eigenstates |m>, m = -J..J (index k = m + J).  N must be
// even so m = 0 exists.
//
// Basis gauge: ladder operators for the y-quantized triple use
// J_+/- = J_z +/- i J_x with Condon-Shortley magnitudes and the |m> phases
// chosen so that the squeezed family below has <J_z> > 0.  In this gauge the
// raising elements are <m+1|J_+|m> = -sqrt(J(J+1) - m(m+1)).
struct SpinStateVector {
  int atom_count = 0;
  Eigen::VectorXcd amplitudes;

  int dim() const { return atom_count + 1; }
  double spin_j() const { return 0.5 * atom_count; }
  double norm_error() const { return std::abs(1.0 - amplitudes.squaredNorm()); }
};

// axis1 = J_x (phase imprint and feedback rotations),
// axis3 = J_y at zero frame phase (meter axis; diagonal in the storage basis).
enum class RotationAxis { axis1, axis3 };

// |psi(kappa)> with amplitudes proportional to (-1)^m exp(-(m/kappa)^2).
// Requires N even, N >= 2, kappa > 0.
SpinStateVector build_squeezed_state(int atom_count, double kappa);

// Applies exp(-i * angle * J_axis) in the Schroedinger picture.
SpinStateVector rotate_state(const SpinStateVector& state, RotationAxis axis, double angle);
void rotate_state_in_place(SpinStateVector& state, RotationAxis axis, double angle);

namespace detail {

// |<m+1|J_+|m>| for the transition k -> k+1, k = m + J.
double ladder_a(int atom_count, int k);

// Cached eigendecomposition used to apply exp(-i angle J_x).  J_x is made
// real tridiagonal by the diagonal gauge G = diag(i^k); eigenvectors are the
// columns of `vectors`.
struct AxisOnePlan {
  int atom_count = 0;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;
};

const AxisOnePlan& axis1_plan(int atom_count);

void apply_axis1(const AxisOnePlan& plan, double angle, Eigen::Ref<Eigen::VectorXcd> amps);
// Lockstep variant: column b of `states` is rotated by angles[b].
void apply_axis1_batch(const AxisOnePlan& plan, const Eigen::VectorXd& angles,
                       Eigen::MatrixXcd& states);
void apply_axis3(int atom_count, double angle, Eigen::Ref<Eigen::VectorXcd> amps);

// y-quantized angular momentum operators applied to an amplitude vector
// (used by exact moments and by tests).
void apply_jy(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& in,
              Eigen::Ref<Eigen::VectorXcd> out);
void apply_jz(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& in,
              Eigen::Ref<Eigen::VectorXcd> out);
void apply_jx(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& in,
              Eigen::Ref<Eigen::VectorXcd> out);

}  // namespace detail

}  // namespace qclock
