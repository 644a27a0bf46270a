#pragma once

// Weighted least-squares fit of
//   Y(dt) = A * [monitor(. - dt0; alpha, tau) * g_D](dt) + Y0
// to a coincidence histogram, with covariance and bootstrap uncertainties.

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qjump/instrument.hpp"

namespace qjump {

enum class Param : std::size_t { kAmplitude = 0, kBackground, kDelay, kAlpha, kTau };
inline constexpr std::size_t kParamCount = 5;
inline constexpr std::array<Param, kParamCount> kAllParams{
    Param::kAmplitude, Param::kBackground, Param::kDelay, Param::kAlpha, Param::kTau};

/// Short names used in reports: A, Y0, dt0, alpha, tau.
[[nodiscard]] std::string_view param_name(Param p);

/// Parameter vector indexed by Param.
struct ParamSet {
  std::array<double, kParamCount> values{};

  double& operator[](Param p) { return values[static_cast<std::size_t>(p)]; }
  double operator[](Param p) const { return values[static_cast<std::size_t>(p)]; }
};

[[nodiscard]] ParamSet make_params(double amplitude, double background, double delay,
                                   double alpha, double tau);

enum class WeightMode { kPoisson, kUniform };

struct FitSpec {
  std::array<bool, kParamCount> free{true, true, true, true, false};
  /// Starting point for free parameters, value for fixed ones.
  ParamSet initial;
  ParamSet lower;
  ParamSet upper;
  WeightMode weight_mode = WeightMode::kPoisson;
  /// Bins whose centers lie in [window_lo, window_hi] enter the fit.
  double window_lo = 0.0;
  double window_hi = 0.0;
  /// 0: exact bin average of the monitor. n >= 1: mean of n evenly spaced
  /// sub-bin samples (1 = bin centers).
  unsigned oversample = 0;
  int max_iterations = 300;

  [[nodiscard]] bool is_free(Param p) const { return free[static_cast<std::size_t>(p)]; }
  void set_free(Param p, bool value) { free[static_cast<std::size_t>(p)] = value; }
  [[nodiscard]] std::size_t free_count() const;
  void validate() const;
};

/// Default bounds: A > 0, Y0 >= 0, alpha >= 0, tau > 0, dt0 unbounded.
[[nodiscard]] ParamSet default_lower_bounds();
[[nodiscard]] ParamSet default_upper_bounds();

struct FitResult {
  ParamSet estimates;
  ParamSet errors;  ///< sqrt of the covariance diagonal, 0 for fixed parameters
  std::array<bool, kParamCount> free{};
  std::array<bool, kParamCount> at_bound{};
  std::vector<Param> free_params;  ///< row/column order of `covariance`
  Eigen::MatrixXd covariance;
  double rise_time = 0.0;
  double rise_time_error = 0.0;
  double chi2 = 0.0;
  int dof = 0;
  int n_iter = 0;
  bool converged = false;
  std::vector<double> objective_history;
  std::size_t window_first = 0;  ///< first histogram bin in the fit window
  std::size_t window_size = 0;
};

/// Expected counts on `grid` (bin centers, spacing equal to g.bin_width).
/// `oversample` as in FitSpec. Throws GridMismatch if the spacings differ.
[[nodiscard]] std::vector<double> model_curve(const ParamSet& params, const DetectorResponse& g,
                                              const UniformGrid& grid, unsigned oversample = 0);

/// Heuristic starting values: Y0 from the median of pre-rise bins, dt0 from
/// the half-height crossing of the smoothed counts, A from the peak excess,
/// alpha = one bin width. tau is set to a tenth of the post-rise span.
[[nodiscard]] ParamSet auto_initial_guess(const Histogram& hist, const DetectorResponse& g);

struct TailFit {
  double tau = 0.0;
  double tau_error = 0.0;
  double amplitude = 0.0;
  double background = 0.0;
};

/// Exponential-plus-constant fit to the bins later than dt0 + 5 FWHM(g).
[[nodiscard]] TailFit fit_tail(const Histogram& hist, const DetectorResponse& g, double dt0,
                               double background_guess);

/// A, Y0, dt0, alpha free; tau fixed at the tail-fit value; whole histogram.
[[nodiscard]] FitSpec default_fit_spec(const Histogram& hist, const DetectorResponse& g);

/// Throws NoConvergence on the iteration cap and SingularNormalMatrix when
/// the free parameters are not jointly identifiable.
[[nodiscard]] FitResult fit(const Histogram& hist, const DetectorResponse& g, const FitSpec& spec);

struct BootstrapResult {
  ParamSet spread;  ///< empirical standard deviation per parameter (0 if fixed)
  ParamSet mean;
  int resamples = 0;
  int failed = 0;
};

/// Poisson-resamples every bin, refits from `spec` and reports the spread.
/// Deterministic for a given seed regardless of thread count. Failed refits
/// are tolerated up to 5% of the resamples.
[[nodiscard]] BootstrapResult bootstrap_uncertainty(const Histogram& hist,
                                                    const DetectorResponse& g,
                                                    const FitSpec& spec, int n_resamples,
                                                    std::uint64_t seed, unsigned threads = 0);

}  // namespace qjump
