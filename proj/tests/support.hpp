#pragma once

// Independent reference implementations used as test oracles.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qjump/cascade.hpp"
#include "qjump/instrument.hpp"

namespace qjump::testing {

using Vec9 = Eigen::Matrix<Complex, 9, 1>;
using Mat9 = Eigen::Matrix<Complex, 9, 9>;

inline Mat9 kron(const Matrix3c& a, const Matrix3c& b) {
  Mat9 out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.block<3, 3>(3 * i, 3 * j) = a(i, j) * b;
  return out;
}

inline Matrix3c ket_bra(int i, int j) {
  Matrix3c m = Matrix3c::Zero();
  m(i, j) = 1.0;
  return m;
}

// vec(A rho B) = (B^T kron A) vec(rho), column stacking. Population rates
// gamma23 for |2> and gamma30 + gamma23/2 for |3>.
inline Mat9 kron_liouvillian(const CascadeParams& p) {
  constexpr double hbar = 1.054571817e-34;
  const Matrix3c id = Matrix3c::Identity();
  Matrix3c h = Matrix3c::Zero();
  h(1, 1) = p.delta_eff + p.e2 / hbar;
  h(2, 2) = p.e3 / hbar;
  h(0, 1) = h(1, 0) = 0.5 * p.omega_eff;
  const Complex i(0.0, 1.0);
  Mat9 l = -i * (kron(id, h) - kron(h.transpose(), id));
  const auto channel = [&](const Matrix3c& jump, double rate) {
    const Matrix3c n = jump.adjoint() * jump;
    l += rate * (kron(jump.conjugate(), jump) - 0.5 * kron(id, n) - 0.5 * kron(n.transpose(), id));
  };
  channel(ket_bra(2, 1), p.gamma23);
  channel(ket_bra(0, 2), p.gamma30 + 0.5 * p.gamma23);
  return l;
}

inline Vec9 vec(const Matrix3c& m) {
  Vec9 v;
  for (int j = 0; j < 3; ++j)
    for (int r = 0; r < 3; ++r) v(r + 3 * j) = m(r, j);
  return v;
}

inline Matrix3c unvec(const Vec9& v) {
  Matrix3c m;
  for (int j = 0; j < 3; ++j)
    for (int r = 0; r < 3; ++r) m(r, j) = v(r + 3 * j);
  return m;
}

// Steady state from the kernel of the oracle generator (LU, not SVD).
inline Matrix3c oracle_steady_state(const CascadeParams& p) {
  Mat9 l = kron_liouvillian(p);
  // Replace one row by the trace condition.
  Vec9 rhs = Vec9::Zero();
  for (int k = 0; k < 9; ++k) l(0, k) = 0.0;
  for (int d = 0; d < 3; ++d) l(0, d + 3 * d) = 1.0;
  rhs(0) = 1.0;
  return unvec(l.fullPivLu().solve(rhs));
}

// rho33 after evolving |3><3| for dt via the matrix exponential.
inline double oracle_pop33(const CascadeParams& p, double dt) {
  if (dt < 0.0) return 0.0;
  const Mat9 prop = (kron_liouvillian(p) * Complex(dt, 0.0)).exp();
  return (prop * vec(ket_bra(2, 2)))(2 + 3 * 2).real();
}

inline CascadeParams random_cascade(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CascadeParams p;
  p.gamma30 = 1.0 / 27e-9 * (0.8 + 0.4 * u(rng));
  p.gamma23 = 1e7 + 1e8 * u(rng);
  p.omega_eff = 1e6 + 5e7 * u(rng);
  p.delta_eff = -1e8 + 2e8 * u(rng);
  return p;
}

inline Matrix3c random_density(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix3c a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = Complex(n(rng), n(rng));
  Matrix3c rho = a * a.adjoint();
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

inline double max_abs(const Matrix3c& m) { return m.cwiseAbs().maxCoeff(); }

// Fine-grid trapezoid integral of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int k = 1; k < n; ++k) s += f(a + k * h);
  return s * h;
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("qjump_test_" + name)).string();
}

}  // namespace qjump::testing
