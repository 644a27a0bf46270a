#pragma once

// Effective three-level cascade |0> -> |2> (coherent two-photon drive) followed
// by spontaneous decay |2> -> |3> -> |0>, with the intermediate level |1>
// adiabatically eliminated. All frequencies are angular (rad/s), all rates in
// 1/s and all times in seconds.

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qjump/grid.hpp"

namespace qjump {

using Complex = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;
using Liouvillian = Eigen::Matrix<Complex, 9, 9>;

// Basis ordering of every 3x3 operator in this library: {|0>, |2>, |3>}.
inline constexpr int kLevel0 = 0;
inline constexpr int kLevel2 = 1;
inline constexpr int kLevel3 = 2;

/// Bare pump parameters of the four-level diamond before elimination of |1>.
struct BarePumpParams {
  double omega01 = 0.0;  ///< Rabi frequency |0> <-> |1>
  double omega12 = 0.0;  ///< Rabi frequency |1> <-> |2>
  double delta1 = 0.0;   ///< detuning of the first pump from |1>
  double delta2 = 0.0;   ///< two-photon detuning
};

struct DecayRates {
  double gamma23 = 0.0;
  double gamma30 = 0.0;
};

/// Level energies E2, E3 in joules. They only add phases to coherences.
struct LevelEnergies {
  double e2 = 0.0;
  double e3 = 0.0;
};

struct CascadeParams {
  double delta_eff = 0.0;
  double omega_eff = 0.0;
  double gamma23 = 0.0;
  double gamma30 = 0.0;
  double e2 = 0.0;
  double e3 = 0.0;

  /// Throws NonFiniteInput / InputError when the invariants do not hold.
  void validate() const;
};

/// Default adiabaticity criterion: |delta1| >= factor * max(|omega01|, |omega12|).
inline constexpr double kDefaultAdiabaticityFactor = 5.0;

/// Adiabatic elimination of the intermediate level.
///   delta_eff = delta2 + omega01^2 / (4 delta1) - omega12^2 / (4 delta1)
///   omega_eff = -omega01 omega12 / (2 delta1)
/// Throws AdiabaticityViolation when the far-detuning criterion fails and
/// NonFiniteInput for NaN/Inf fields.
[[nodiscard]] CascadeParams effective_params(const BarePumpParams& bare, DecayRates gammas,
                                             LevelEnergies energies = {},
                                             double adiabaticity_factor = kDefaultAdiabaticityFactor);

/// Population decay rates used by the generator.
///
/// This is the single place where the rate convention is fixed: |2> empties
/// into |3> at gamma23 and |3> empties into |0> at gamma30 + gamma23 / 2, so
/// a conditioned |3><3| decays exactly as exp(-(gamma30 + gamma23/2) dt).
/// Written in the "2 s rho s^+ - s_nn rho - rho s_nn" form, each channel
/// coefficient is half of the population rate returned here.
struct PopulationDecayRates {
  double level2 = 0.0;
  double level3 = 0.0;
};
[[nodiscard]] PopulationDecayRates population_decay_rates(const CascadeParams& p);

struct EvolveStats {
  long accepted_steps = 0;
  long rejected_steps = 0;
};

/// 3x3 Hermitian, unit-trace state over {|0>, |2>, |3>}.
class DensityMatrix {
 public:
  /// Ground state |0><0|.
  DensityMatrix();

  /// Validates hermiticity (1e-12), unit trace (1e-9) and diagonal range.
  explicit DensityMatrix(const Matrix3c& elements);

  [[nodiscard]] static DensityMatrix pure(int level);

  [[nodiscard]] const Matrix3c& matrix() const { return m_; }
  [[nodiscard]] Complex operator()(int i, int j) const { return m_(i, j); }
  [[nodiscard]] double population(int level) const { return m_(level, level).real(); }
  [[nodiscard]] double trace() const { return m_.trace().real(); }

 private:
  struct Unchecked {};
  DensityMatrix(const Matrix3c& elements, Unchecked) : m_(elements) {}
  friend DensityMatrix evolve(const DensityMatrix&, const CascadeParams&, double, double,
                              EvolveStats*);
  friend DensityMatrix steady_state(const CascadeParams&);

  Matrix3c m_;
};

/// d rho / dt of the effective master equation. The result is traceless and
/// Hermitian for Hermitian input.
[[nodiscard]] Matrix3c lindblad_rhs(const Matrix3c& rho, const CascadeParams& p);
[[nodiscard]] Matrix3c lindblad_rhs(const DensityMatrix& rho, const CascadeParams& p);

/// Generator in column-stacked vectorization (index i + 3 j for element (i, j)),
/// assembled by applying lindblad_rhs to the matrix units.
[[nodiscard]] Liouvillian liouvillian(const CascadeParams& p);

/// Propagates rho0 by t_span with an adaptive Dormand-Prince 5(4) scheme
/// (absolute tolerance 1e-10 per element, step never above dt_max).
/// Throws IntegrationDivergence if the trace drifts by more than 1e-6.
[[nodiscard]] DensityMatrix evolve(const DensityMatrix& rho0, const CascadeParams& p, double t_span,
                                   double dt_max, EvolveStats* stats = nullptr);

/// rho'_33 conditioned on a signal detection at dt = 0:
/// 0 for dt < 0 and exp(-(gamma30 + gamma23/2) dt) for dt >= 0.
[[nodiscard]] double conditional_pop33(double dt, const CascadeParams& p);

/// Unique zero of the generator, from the null space of the 9x9 Liouvillian.
/// Throws DegenerateGenerator when the null space is not one-dimensional.
[[nodiscard]] DensityMatrix steady_state(const CascadeParams& p);

/// Which conditioned |3> population enters the correlation.
enum class ConditionalModel {
  kAnalytic,  ///< closed-form exponential (default)
  kNumeric,   ///< numerical evolution of |3><3| under the full driven generator
};

struct CorrelationCurve {
  UniformGrid grid;
  std::vector<double> values;
};

/// P(t_ss, t_ss + dt) = rho22_ss * rho'_33(dt) on every grid point.
[[nodiscard]] CorrelationCurve pair_correlation(const CascadeParams& p, const UniformGrid& grid,
                                                ConditionalModel model = ConditionalModel::kAnalytic);

}  // namespace qjump
