#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace qclock {

namespace detail {

template <typename F>
double simpson_rec(const F& f, double a, double m, double b, double fa, double fm,
                   double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature with absolute tolerance.
template <typename F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-12, int max_depth = 48) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, m, b, fa, fm, fb, whole, abs_tol, max_depth);
}

// Gauss-Hermite rule for expectations against the standard normal density:
// E[f(Z)] ~= sum_i w_i f(x_i).  Nodes/weights from the Golub-Welsch
// eigenproblem of the probabilists' Hermite recurrence (off-diagonal sqrt(k)).
struct GaussHermite {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  explicit GaussHermite(int n) {
    if (n < 1) throw std::invalid_argument("GaussHermite: n >= 1 required");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      const double b = std::sqrt(static_cast<double>(k));
      jacobi(k, k - 1) = b;
      jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    nodes = es.eigenvalues();
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
      const double v0 = es.eigenvectors()(0, i);
      weights(i) = v0 * v0;  // first moment of N(0,1) measure is 1
    }
  }

  // E[f(X)] for X ~ N(mean, stddev^2).
  template <typename F>
  double expect(const F& f, double mean = 0.0, double stddev = 1.0) const {
    double acc = 0.0;
    for (int i = 0; i < nodes.size(); ++i)
      acc += weights(i) * f(mean + stddev * nodes(i));
    return acc;
  }
};

inline const GaussHermite& gauss_hermite_64() {
  static const GaussHermite rule(64);
  return rule;
}

}  // namespace qclock
