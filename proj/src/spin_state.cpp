#include "qclock/spin_state.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>

namespace qclock {

using std::complex;

SpinStateVector build_squeezed_state(int atom_count, double kappa) {
  if (atom_count < 2 || atom_count % 2 != 0)
    throw std::domain_error("build_squeezed_state: atom count must be even and >= 2");
  if (!(kappa > 0.0))
    throw std::domain_error("build_squeezed_state: kappa must be positive");

  const int j = atom_count / 2;
  SpinStateVector state;
  state.atom_count = atom_count;
  state.amplitudes.resize(atom_count + 1);
  for (int k = 0; k <= atom_count; ++k) {
    const int m = k - j;
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    const double r = m / kappa;
    state.amplitudes(k) = sign * std::exp(-r * r);
  }
  state.amplitudes /= state.amplitudes.norm();
  return state;
}

namespace detail {

double ladder_a(int atom_count, int k) {
  const double j = 0.5 * atom_count;
  const double m = k - j;
  return std::sqrt(j * (j + 1.0) - m * (m + 1.0));
}

namespace {

// i^k and (-i)^k lookup for the tridiagonal gauge.
inline complex<double> gauge_phase(int k) {
  static const complex<double> table[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return table[k & 3];
}

std::shared_mutex plan_mutex;
std::map<int, std::unique_ptr<AxisOnePlan>> plan_cache;

}  // namespace

const AxisOnePlan& axis1_plan(int atom_count) {
  {
    std::shared_lock lock(plan_mutex);
    auto it = plan_cache.find(atom_count);
    if (it != plan_cache.end()) return *it->second;
  }
  const int d = atom_count + 1;
  // G^dag J_x G is real symmetric tridiagonal with off-diagonal a_k / 2.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k + 1 < d; ++k) {
    const double v = 0.5 * ladder_a(atom_count, k);
    t(k + 1, k) = v;
    t(k, k + 1) = v;
  }
  auto plan = std::make_unique<AxisOnePlan>();
  plan->atom_count = atom_count;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  plan->eigenvalues = es.eigenvalues();
  plan->vectors = es.eigenvectors();

  std::unique_lock lock(plan_mutex);
  auto [it, inserted] = plan_cache.emplace(atom_count, std::move(plan));
  return *it->second;
}

void apply_axis1(const AxisOnePlan& plan, double angle, Eigen::Ref<Eigen::VectorXcd> amps) {
  const int d = plan.atom_count + 1;
  Eigen::VectorXcd work(d);
  for (int k = 0; k < d; ++k) work(k) = std::conj(gauge_phase(k)) * amps(k);
  Eigen::VectorXd re = plan.vectors.transpose() * work.real();
  Eigen::VectorXd im = plan.vectors.transpose() * work.imag();
  for (int k = 0; k < d; ++k) {
    const complex<double> phase = std::polar(1.0, -angle * plan.eigenvalues(k));
    work(k) = phase * complex<double>(re(k), im(k));
  }
  re.noalias() = plan.vectors * work.real();
  im.noalias() = plan.vectors * work.imag();
  for (int k = 0; k < d; ++k) amps(k) = gauge_phase(k) * complex<double>(re(k), im(k));
}

void apply_axis1_batch(const AxisOnePlan& plan, const Eigen::VectorXd& angles,
                       Eigen::MatrixXcd& states) {
  const int d = plan.atom_count + 1;
  const int batch = static_cast<int>(states.cols());
  if (angles.size() != batch)
    throw std::invalid_argument("apply_axis1_batch: angle/state count mismatch");
  Eigen::MatrixXd re(d, batch), im(d, batch);
  for (int b = 0; b < batch; ++b)
    for (int k = 0; k < d; ++k) {
      const complex<double> v = std::conj(gauge_phase(k)) * states(k, b);
      re(k, b) = v.real();
      im(k, b) = v.imag();
    }
  Eigen::MatrixXd pre = plan.vectors.transpose() * re;
  Eigen::MatrixXd pim = plan.vectors.transpose() * im;
  for (int b = 0; b < batch; ++b)
    for (int k = 0; k < d; ++k) {
      const complex<double> phase = std::polar(1.0, -angles(b) * plan.eigenvalues(k));
      const complex<double> v = phase * complex<double>(pre(k, b), pim(k, b));
      pre(k, b) = v.real();
      pim(k, b) = v.imag();
    }
  re.noalias() = plan.vectors * pre;
  im.noalias() = plan.vectors * pim;
  for (int b = 0; b < batch; ++b)
    for (int k = 0; k < d; ++k)
      states(k, b) = gauge_phase(k) * complex<double>(re(k, b), im(k, b));
}

void apply_axis3(int atom_count, double angle, Eigen::Ref<Eigen::VectorXcd> amps) {
  const int j = atom_count / 2;
  for (int k = 0; k <= atom_count; ++k)
    amps(k) *= std::polar(1.0, -angle * (k - j));
}

void apply_jy(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& in,
              Eigen::Ref<Eigen::VectorXcd> out) {
  const int j = atom_count / 2;
  for (int k = 0; k <= atom_count; ++k) out(k) = static_cast<double>(k - j) * in(k);
}

void apply_jz(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& in,
              Eigen::Ref<Eigen::VectorXcd> out) {
  const int d = atom_count + 1;
  for (int k = 0; k < d; ++k) {
    complex<double> acc(0.0, 0.0);
    if (k > 0) acc += -0.5 * ladder_a(atom_count, k - 1) * in(k - 1);
    if (k + 1 < d) acc += -0.5 * ladder_a(atom_count, k) * in(k + 1);
    out(k) = acc;
  }
}

void apply_jx(int atom_count, const Eigen::Ref<const Eigen::VectorXcd>& in,
              Eigen::Ref<Eigen::VectorXcd> out) {
  const int d = atom_count + 1;
  const complex<double> ih(0.0, 0.5);
  for (int k = 0; k < d; ++k) {
    complex<double> acc(0.0, 0.0);
    if (k > 0) acc += ih * ladder_a(atom_count, k - 1) * in(k - 1);
    if (k + 1 < d) acc -= ih * ladder_a(atom_count, k) * in(k + 1);
    out(k) = acc;
  }
}

}  // namespace detail

void rotate_state_in_place(SpinStateVector& state, RotationAxis axis, double angle) {
  if (!std::isfinite(angle)) throw std::domain_error("rotate_state: non-finite angle");
  if (axis == RotationAxis::axis3) {
    detail::apply_axis3(state.atom_count, angle, state.amplitudes);
  } else {
    detail::apply_axis1(detail::axis1_plan(state.atom_count), angle, state.amplitudes);
  }
}

SpinStateVector rotate_state(const SpinStateVector& state, RotationAxis axis, double angle) {
  SpinStateVector out = state;
  rotate_state_in_place(out, axis, angle);
  return out;
}

}  // namespace qclock
