#include "qjump/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qjump/error.hpp"

namespace qjump {
namespace {

constexpr double kHbar = 1.054571817e-34;  // J s

constexpr double kHermitianTol = 1e-12;
constexpr double kTraceTol = 1e-9;
constexpr double kDiagonalTol = 1e-9;
constexpr double kDivergenceTraceTol = 1e-6;
constexpr double kAbsTol = 1e-10;
constexpr long kMaxSteps = 50'000'000;

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw NonFiniteInput(std::string("non-finite value for ") + name);
}

Matrix3c hermitize(const Matrix3c& m) { return 0.5 * (m + m.adjoint()); }

// One channel |from> -> |to> with population rate `rate`:
// rate * (rho_ff |to><to| - (|f><f| rho + rho |f><f|) / 2).
void add_decay(Matrix3c& out, const Matrix3c& rho, int from, int to, double rate) {
  out(to, to) += rate * rho(from, from);
  for (int k = 0; k < 3; ++k) {
    out(from, k) -= 0.5 * rate * rho(from, k);
    out(k, from) -= 0.5 * rate * rho(k, from);
  }
}

}  // namespace

void CascadeParams::validate() const {
  require_finite(delta_eff, "delta_eff");
  require_finite(omega_eff, "omega_eff");
  require_finite(gamma23, "gamma23");
  require_finite(gamma30, "gamma30");
  require_finite(e2, "e2");
  require_finite(e3, "e3");
  if (!(gamma23 > 0.0) || !(gamma30 > 0.0)) {
    throw InputError("decay rates gamma23 and gamma30 must be positive");
  }
}

CascadeParams effective_params(const BarePumpParams& bare, DecayRates gammas,
                               LevelEnergies energies, double adiabaticity_factor) {
  require_finite(bare.omega01, "omega01");
  require_finite(bare.omega12, "omega12");
  require_finite(bare.delta1, "delta1");
  require_finite(bare.delta2, "delta2");
  require_finite(gammas.gamma23, "gamma23");
  require_finite(gammas.gamma30, "gamma30");
  require_finite(energies.e2, "e2");
  require_finite(energies.e3, "e3");
  require_finite(adiabaticity_factor, "adiabaticity factor");

  const double coupling = std::max(std::abs(bare.omega01), std::abs(bare.omega12));
  if (bare.delta1 == 0.0 || std::abs(bare.delta1) < adiabaticity_factor * coupling) {
    throw AdiabaticityViolation("|delta1| = " + std::to_string(std::abs(bare.delta1)) +
                                " rad/s is below " + std::to_string(adiabaticity_factor) +
                                " x max Rabi frequency " + std::to_string(coupling) + " rad/s");
  }

  CascadeParams p;
  p.delta_eff = bare.delta2 + bare.omega01 * bare.omega01 / (4.0 * bare.delta1) -
                bare.omega12 * bare.omega12 / (4.0 * bare.delta1);
  p.omega_eff = -bare.omega01 * bare.omega12 / (2.0 * bare.delta1);
  p.gamma23 = gammas.gamma23;
  p.gamma30 = gammas.gamma30;
  p.e2 = energies.e2;
  p.e3 = energies.e3;
  return p;
}

PopulationDecayRates population_decay_rates(const CascadeParams& p) {
  return {p.gamma23, p.gamma30 + 0.5 * p.gamma23};
}

DensityMatrix::DensityMatrix() : m_(Matrix3c::Zero()) { m_(kLevel0, kLevel0) = 1.0; }

DensityMatrix::DensityMatrix(const Matrix3c& elements) : m_(elements) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (!std::isfinite(m_(i, j).real()) || !std::isfinite(m_(i, j).imag())) {
        throw NonFiniteInput("density matrix has non-finite elements");
      }
      if (std::abs(m_(i, j) - std::conj(m_(j, i))) > kHermitianTol) {
        throw InputError("density matrix is not Hermitian");
      }
    }
    const double d = m_(i, i).real();
    if (d < -kDiagonalTol || d > 1.0 + kDiagonalTol) {
      throw InputError("density matrix population outside [0, 1]");
    }
  }
  if (std::abs(m_.trace().real() - 1.0) > kTraceTol) {
    throw InputError("density matrix trace differs from 1");
  }
}

DensityMatrix DensityMatrix::pure(int level) {
  if (level < 0 || level > 2) throw InputError("level index out of range");
  Matrix3c m = Matrix3c::Zero();
  m(level, level) = 1.0;
  return DensityMatrix(m);
}

Matrix3c lindblad_rhs(const Matrix3c& rho, const CascadeParams& p) {
  // H / hbar in rad/s.
  Matrix3c h = Matrix3c::Zero();
  h(kLevel2, kLevel2) = p.delta_eff + p.e2 / kHbar;
  h(kLevel3, kLevel3) = p.e3 / kHbar;
  h(kLevel2, kLevel0) = 0.5 * p.omega_eff;
  h(kLevel0, kLevel2) = 0.5 * p.omega_eff;

  const Complex minus_i(0.0, -1.0);
  Matrix3c out = minus_i * (h * rho - rho * h);

  const PopulationDecayRates rates = population_decay_rates(p);
  add_decay(out, rho, kLevel2, kLevel3, rates.level2);
  add_decay(out, rho, kLevel3, kLevel0, rates.level3);
  return out;
}

Matrix3c lindblad_rhs(const DensityMatrix& rho, const CascadeParams& p) {
  return lindblad_rhs(rho.matrix(), p);
}

Liouvillian liouvillian(const CascadeParams& p) {
  Liouvillian l = Liouvillian::Zero();
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      Matrix3c unit = Matrix3c::Zero();
      unit(i, j) = 1.0;
      const Matrix3c image = lindblad_rhs(unit, p);
      for (int b = 0; b < 3; ++b) {
        for (int a = 0; a < 3; ++a) l(a + 3 * b, i + 3 * j) = image(a, b);
      }
    }
  }
  return l;
}

DensityMatrix evolve(const DensityMatrix& rho0, const CascadeParams& p, double t_span,
                     double dt_max, EvolveStats* stats) {
  p.validate();
  if (!std::isfinite(t_span) || t_span < 0.0) throw InputError("t_span must be >= 0");
  if (!std::isfinite(dt_max) || !(dt_max > 0.0)) throw InputError("dt_max must be > 0");

  // Dormand-Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;  // autonomous system

  Matrix3c y = rho0.matrix();
  double t = 0.0;
  double h = std::min(dt_max, t_span);
  EvolveStats local;

  Matrix3c k1 = lindblad_rhs(y, p);
  while (t < t_span) {
    const double remaining = t_span - t;
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const Matrix3c k2 = lindblad_rhs(y + h * a21 * k1, p);
    const Matrix3c k3 = lindblad_rhs(y + h * (a31 * k1 + a32 * k2), p);
    const Matrix3c k4 = lindblad_rhs(y + h * (a41 * k1 + a42 * k2 + a43 * k3), p);
    const Matrix3c k5 = lindblad_rhs(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), p);
    const Matrix3c k6 =
        lindblad_rhs(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), p);
    const Matrix3c y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Matrix3c k7 = lindblad_rhs(y_new, p);
    const Matrix3c err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double err_norm = err.cwiseAbs().maxCoeff() / kAbsTol;
    if (!std::isfinite(err_norm)) throw IntegrationDivergence("non-finite integration error");

    if (err_norm <= 1.0) {
      t = last ? t_span : t + h;
      y = hermitize(y_new);
      k1 = k7;
      ++local.accepted_steps;
      if (std::abs(y.trace().real() - 1.0) > kDivergenceTraceTol) {
        throw IntegrationDivergence("trace drifted beyond 1e-6");
      }
    } else {
      ++local.rejected_steps;
    }
    if (local.accepted_steps + local.rejected_steps > kMaxSteps) {
      throw IntegrationDivergence("step budget exhausted");
    }
    const double factor =
        err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
    h = std::min(dt_max, h * factor);
  }
  if (stats != nullptr) *stats = local;
  return DensityMatrix(y, DensityMatrix::Unchecked{});
}

double conditional_pop33(double dt, const CascadeParams& p) {
  if (dt < 0.0) return 0.0;
  return std::exp(-population_decay_rates(p).level3 * dt);
}

DensityMatrix steady_state(const CascadeParams& p) {
  p.validate();
  Liouvillian l = liouvillian(p);
  const double scale = l.cwiseAbs().maxCoeff();
  l /= scale;

  const Eigen::JacobiSVD<Liouvillian> svd(l, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  constexpr double kNullTol = 1e-10;
  int null_dim = 0;
  for (int k = 0; k < 9; ++k) {
    if (s(k) <= kNullTol * s(0)) ++null_dim;
  }
  if (null_dim != 1) {
    throw DegenerateGenerator("generator null space has dimension " + std::to_string(null_dim));
  }

  const Eigen::Matrix<Complex, 9, 1> v = svd.matrixV().col(8);
  Matrix3c rho;
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) rho(i, j) = v(i + 3 * j);
  }
  rho /= rho.trace();
  rho = hermitize(rho);

  const Eigen::SelfAdjointEigenSolver<Matrix3c> eig(rho, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9) {
    throw DegenerateGenerator("steady state is not positive semidefinite");
  }
  return DensityMatrix(rho, DensityMatrix::Unchecked{});
}

CorrelationCurve pair_correlation(const CascadeParams& p, const UniformGrid& grid,
                                  ConditionalModel model) {
  if (!(grid.step > 0.0)) throw InputError("correlation grid step must be positive");
  const double rho22 = steady_state(p).population(kLevel2);

  CorrelationCurve curve{grid, std::vector<double>(grid.size, 0.0)};
  if (model == ConditionalModel::kAnalytic) {
    for (std::size_t k = 0; k < grid.size; ++k) {
      curve.values[k] = rho22 * conditional_pop33(grid.at(k), p);
    }
    return curve;
  }

  const double dt_max = 0.05 / (population_decay_rates(p).level3 + p.gamma23 + std::abs(p.omega_eff) +
                                std::abs(p.delta_eff));
  DensityMatrix conditioned = DensityMatrix::pure(kLevel3);
  double t = 0.0;
  for (std::size_t k = 0; k < grid.size; ++k) {
    const double dt = grid.at(k);
    if (dt < 0.0) continue;
    conditioned = evolve(conditioned, p, dt - t, dt_max);
    t = dt;
    curve.values[k] = rho22 * std::max(0.0, conditioned.population(kLevel3));
  }
  return curve;
}

}  // namespace qjump
