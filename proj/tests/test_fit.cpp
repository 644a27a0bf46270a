#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <doctest.h>

#include "fit_support.hpp"
#include "qjump/error.hpp"
#include "qjump/fit.hpp"
#include "qjump/least_squares.hpp"
#include "qjump/synth.hpp"
#include "support.hpp"

using namespace qjump;
using namespace qjump::testing;

namespace {

const double kTwoLn9 = 2.0 * std::log(9.0);

ParamSet reference_params() { return make_params(3000.0, 10.0, 14 * kNsec, 4.7 * kPsec, 7 * kNsec); }

Histogram synthetic(std::uint64_t seed, double alpha = 4.7 * kPsec, double fwhm = 50 * kPsec) {
  SynthConfig c = short_window_config(seed, alpha);
  if (fwhm > 100 * kPsec) {
    c.t_max = 30 * kNsec;
    c.n_pairs *= 4;
  }
  return sample_events(c, gaussian_response(fwhm, c.bin_width), 1);
}

FitSpec synthetic_spec(const Histogram& h) {
  FitSpec s = spec_near(h, make_params(1000.0, 5.0, 14.02 * kNsec, 10 * kPsec, 7 * kNsec));
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("parameter bookkeeping") {
  CHECK(param_name(Param::kAmplitude) == "A");
  CHECK(param_name(Param::kBackground) == "Y0");
  CHECK(param_name(Param::kDelay) == "dt0");
  CHECK(param_name(Param::kAlpha) == "alpha");
  CHECK(param_name(Param::kTau) == "tau");
  CHECK(param_name(static_cast<Param>(9)) == "?");
  const ParamSet p = make_params(1, 2, 3, 4, 5);
  CHECK(p[Param::kDelay] == 3.0);
  CHECK(default_lower_bounds()[Param::kAlpha] == 0.0);
  CHECK(std::isinf(default_upper_bounds()[Param::kTau]));
  FitSpec s;
  CHECK(s.free_count() == 4);
  CHECK_FALSE(s.is_free(Param::kTau));
  s.set_free(Param::kTau, true);
  CHECK(s.free_count() == 5);
}

TEST_CASE("FitSpec validation") {
  const auto base = [] {
    FitSpec s;
    s.initial = reference_params();
    s.lower = default_lower_bounds();
    s.upper = default_upper_bounds();
    s.window_lo = 0.0;
    s.window_hi = 1.0;
    return s;
  };
  CHECK_NOTHROW(base().validate());
  const auto fails = [&](auto mutate) {
    FitSpec s = base();
    mutate(s);
    CHECK_THROWS_AS(s.validate(), InputError);
  };
  fails([](FitSpec& s) { s.free = {false, false, false, false, false}; });
  fails([](FitSpec& s) { s.initial[Param::kAlpha] = std::nan(""); });
  fails([](FitSpec& s) { s.lower[Param::kDelay] = 1.0; s.upper[Param::kDelay] = 0.0; });
  fails([](FitSpec& s) { s.initial[Param::kAmplitude] = -1.0; });
  fails([](FitSpec& s) { s.upper[Param::kAlpha] = 1e-12; });
  fails([](FitSpec& s) { s.lower[Param::kAlpha] = -1.0; });
  fails([](FitSpec& s) { s.lower[Param::kTau] = 0.0; });
  fails([](FitSpec& s) { s.lower[Param::kBackground] = -1.0; });
  fails([](FitSpec& s) { s.lower[Param::kAmplitude] = -1.0; });
  fails([](FitSpec& s) { s.window_hi = s.window_lo; });
  fails([](FitSpec& s) { s.max_iterations = 0; });
}

TEST_CASE("model curve examples") {
  const DetectorResponse g = gaussian_response(50 * kPsec, 10 * kPsec);
  const UniformGrid grid{13.5 * kNsec, 10 * kPsec, 200};
  SUBCASE("zero amplitude is the background") {
    ParamSet p = reference_params();
    p[Param::kAmplitude] = 0.0;
    for (const double v : model_curve(p, g, grid)) CHECK(v == 10.0);
  }
  SUBCASE("ideal detector and ideal step") {
    const ParamSet p = make_params(500.0, 0.0, 14.0 * kNsec + 3 * kPsec, 0.0, 7 * kNsec);
    const DetectorResponse d = delta_response(10 * kPsec);
    const auto centers = model_curve(p, d, grid, 1);
    const auto averaged = model_curve(p, d, grid);
    for (std::size_t i = 0; i < grid.size; ++i) {
      const double x = grid.at(i) - p[Param::kDelay];
      const double sampled = x < 0.0 ? 0.0 : 500.0 * std::exp(-x / 7e-9);
      CHECK(centers[i] == doctest::Approx(sampled).epsilon(1e-12));
      // Exact bin average of the step-exponential.
      const double lo = std::max(x - 5 * kPsec, 0.0);
      const double hi = std::max(x + 5 * kPsec, 0.0);
      const double avg = 500.0 * 7e-9 * (std::exp(-lo / 7e-9) - std::exp(-hi / 7e-9)) / (10 * kPsec);
      CHECK(averaged[i] == doctest::Approx(avg).epsilon(1e-12).scale(1.0));
    }
  }
  SUBCASE("sub-bin sampling converges to the bin average") {
    const ParamSet p = reference_params();
    const auto exact = model_curve(p, g, grid);
    const auto coarse = model_curve(p, g, grid, 4);
    const auto fine = model_curve(p, g, grid, 64);
    double err_coarse = 0.0;
    double err_fine = 0.0;
    for (std::size_t i = 0; i < grid.size; ++i) {
      err_coarse = std::max(err_coarse, std::abs(coarse[i] - exact[i]));
      err_fine = std::max(err_fine, std::abs(fine[i] - exact[i]));
    }
    CHECK(err_fine < 1e-3 * 3000.0);
    CHECK(err_fine < err_coarse / 100.0);
  }
  SUBCASE("grid mismatch") {
    CHECK_THROWS_AS((void)model_curve(reference_params(), g, {0.0, 5 * kPsec, 10}), GridMismatch);
  }
}

TEST_CASE("leading edge width combines jitter and jump time in quadrature") {
  // Fine-grid oracle: direct quadrature of the monitor against the Gaussian
  // jitter density, then the 10-90 width of that curve.
  const ParamSet p = make_params(3000.0, 10.0, 14 * kNsec, 4.7 * kPsec, 7 * kNsec);
  const double sigma = 50 * kPsec / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const MonitorParams m{p[Param::kAlpha], p[Param::kTau]};
  const UniformGrid fine{13.7 * kNsec, 0.5 * kPsec, 1200};
  std::vector<double> oracle(fine.size);
  for (std::size_t i = 0; i < fine.size; ++i) {
    const double t = fine.at(i) - p[Param::kDelay];
    const auto integrand = [&](double s) {
      return monitor(t - s, m) * std::exp(-0.5 * s * s / (sigma * sigma)) / (std::sqrt(2.0 * M_PI) * sigma);
    };
    oracle[i] = 3000.0 * integrate(integrand, -8 * sigma, 8 * sigma, 4000) + 10.0;
  }
  const auto oracle_width = edge_10_90(oracle, fine, 10.0, 3010.0);
  REQUIRE(oracle_width.has_value());
  const double quadrature = std::hypot(54.4, 20.7) * kPsec;
  CHECK(*oracle_width == doctest::Approx(quadrature).epsilon(0.10));

  const DetectorResponse g = gaussian_response(50 * kPsec, 1 * kPsec);
  const UniformGrid grid{13.7 * kNsec, 1 * kPsec, 600};
  const auto curve = model_curve(p, g, grid);
  const auto width = edge_10_90(curve, grid, 10.0, 3010.0);
  REQUIRE(width.has_value());
  CHECK(*width == doctest::Approx(*oracle_width).epsilon(0.02));
  CHECK(*width == doctest::Approx(quadrature).epsilon(0.10));
}

TEST_CASE("noise-free data recovers every parameter") {
  const DetectorResponse g = gaussian_response(50 * kPsec, 10 * kPsec);
  const ParamSet truth = reference_params();
  const Histogram h = exact_histogram(truth, g, 13.505 * kNsec, 300);
  FitSpec s = spec_near(h, make_params(2500.0, 8.0, 14.015 * kNsec, 8 * kPsec, 6 * kNsec));
  s.set_free(Param::kTau, true);
  const FitResult r = fit(h, g, s);
  CHECK(r.converged);
  for (const Param p : kAllParams) {
    CAPTURE(param_name(p));
    CHECK(rel(r.estimates[p], truth[p]) < 1e-4);
  }
  CHECK(r.chi2 < 1e-10);
}

TEST_CASE("fit result invariants") {
  const Histogram h = synthetic(3);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  const FitResult r = fit(h, g, synthetic_spec(h));
  CHECK(r.converged);
  CHECK(r.dof == static_cast<int>(r.window_size) - 4);
  CHECK(r.window_size == h.size() - 20);
  CHECK(r.free_params.size() == 4);
  CHECK(r.errors[Param::kTau] == 0.0);
  CHECK(r.rise_time == kTwoLn9 * r.estimates[Param::kAlpha]);
  CHECK(r.rise_time_error == doctest::Approx(kTwoLn9 * std::sqrt(r.covariance(3, 3))));
  const Eigen::MatrixXd& cov = r.covariance;
  CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * cov.cwiseAbs().maxCoeff());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * eig.eigenvalues().maxCoeff());
  REQUIRE(r.objective_history.size() >= 2);
  for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
    CHECK(r.objective_history[k] < r.objective_history[k - 1]);
  }
  CHECK(r.chi2 == r.objective_history.back());
  CHECK(r.chi2 / r.dof == doctest::Approx(1.0).epsilon(0.25));
  CHECK(std::abs(r.estimates[Param::kDelay] - 14 * kNsec) < 5 * r.errors[Param::kDelay]);
}

TEST_CASE("shift equivariance") {
  const Histogram h = synthetic(4);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  const FitSpec s = synthetic_spec(h);
  const FitResult base = fit(h, g, s);

  const double shift = 1.23 * kNsec;
  Histogram moved = h;
  moved.t_start += shift;
  FitSpec ms = s;
  ms.initial[Param::kDelay] += shift;
  ms.window_lo += shift;
  ms.window_hi += shift;
  const FitResult r = fit(moved, g, ms);
  CHECK(r.estimates[Param::kDelay] - shift == doctest::Approx(base.estimates[Param::kDelay]).epsilon(1e-12));
  for (const Param p : {Param::kAmplitude, Param::kBackground, Param::kAlpha, Param::kTau}) {
    CAPTURE(param_name(p));
    CHECK(rel(r.estimates[p], base.estimates[p]) < 1e-6);
  }
  CHECK(rel(r.errors[Param::kAlpha], base.errors[Param::kAlpha]) < 1e-3);
}

TEST_CASE("amplitude equivariance") {
  const Histogram h = synthetic(5);
  REQUIRE(*std::min_element(h.counts.begin(), h.counts.end()) >= 1.0);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  const FitSpec s = synthetic_spec(h);
  const FitResult base = fit(h, g, s);
  for (const double m : {2.0, 5.0}) {
    CAPTURE(m);
    Histogram scaled = h;
    for (double& c : scaled.counts) c *= m;
    FitSpec ss = s;
    ss.initial[Param::kAmplitude] *= m;
    ss.initial[Param::kBackground] *= m;
    const FitResult r = fit(scaled, g, ss);
    CHECK(rel(r.estimates[Param::kAmplitude], m * base.estimates[Param::kAmplitude]) < 1e-6);
    CHECK(rel(r.estimates[Param::kBackground], m * base.estimates[Param::kBackground]) < 1e-6);
    CHECK(rel(r.estimates[Param::kDelay], base.estimates[Param::kDelay]) < 1e-9);
    CHECK(std::abs(r.estimates[Param::kAlpha] - base.estimates[Param::kAlpha]) <
          1e-3 * base.errors[Param::kAlpha]);
    CHECK(r.estimates[Param::kTau] == base.estimates[Param::kTau]);
  }
}

TEST_CASE("fixing alpha at zero costs chi2 like one boundary parameter") {
  // Data generated with an ideal jump: the chi2 gain from freeing alpha
  // follows the half chi2(0) + half chi2(1) boundary law, mean 1/2.
  std::vector<double> gains;
  int at_bound = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SynthConfig c = short_window_config(500 + seed, 0.0);
    c.n_pairs = 100000;
    const DetectorResponse g = gaussian_response(50 * kPsec, c.bin_width);
    const Histogram h = sample_events(c, g, 1);
    FitSpec s = synthetic_spec(h);
    s.initial[Param::kAmplitude] = 300.0;
    const FitResult free_alpha = fit(h, g, s);
    s.set_free(Param::kAlpha, false);
    s.initial[Param::kAlpha] = 0.0;
    const FitResult fixed = fit(h, g, s);
    const double gain = fixed.chi2 - free_alpha.chi2;
    // Both fits stop within a small fraction of one chi2 unit of their minima.
    CHECK(gain >= -0.01);
    gains.push_back(std::max(gain, 0.0));
    if (free_alpha.at_bound[static_cast<std::size_t>(Param::kAlpha)] || gain < 1e-3) ++at_bound;
  }
  const double mean_gain = std::accumulate(gains.begin(), gains.end(), 0.0) / gains.size();
  CHECK(mean_gain > 0.1);
  CHECK(mean_gain < 1.1);
  CHECK(at_bound >= 8);
  CHECK(at_bound <= 32);

  // With a real jump time the fixed fit is clearly worse.
  const Histogram h = synthetic(6, 30 * kPsec);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  FitSpec s = synthetic_spec(h);
  const FitResult free_alpha = fit(h, g, s);
  s.set_free(Param::kAlpha, false);
  s.initial[Param::kAlpha] = 0.0;
  CHECK(fit(h, g, s).chi2 - free_alpha.chi2 > 9.0);
}

TEST_CASE("estimate near the alpha bound keeps a finite error") {
  const Histogram h = synthetic(11, 0.0);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  const FitResult r = fit(h, g, synthetic_spec(h));
  CHECK(std::isfinite(r.errors[Param::kAlpha]));
  CHECK(r.errors[Param::kAlpha] > 0.0);
  CHECK(r.errors[Param::kAlpha] < 20 * kPsec);
  CHECK(r.estimates[Param::kAlpha] < 2.5 * r.errors[Param::kAlpha]);
}

TEST_CASE("wider jitter inflates the alpha error") {
  const Histogram narrow = synthetic(8, 4.7 * kPsec, 50 * kPsec);
  const Histogram wide = synthetic(8, 4.7 * kPsec, 500 * kPsec);
  const FitResult rn = fit(narrow, gaussian_response(50 * kPsec, 10 * kPsec), synthetic_spec(narrow));
  const FitResult rw = fit(wide, gaussian_response(500 * kPsec, 10 * kPsec), synthetic_spec(wide));
  CHECK(rw.errors[Param::kAlpha] >= 3.0 * rn.errors[Param::kAlpha]);
}

TEST_CASE("fit error reporting") {
  const Histogram h = synthetic(9);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  const FitSpec s = synthetic_spec(h);
  CHECK_THROWS_AS((void)fit(h, gaussian_response(50 * kPsec, 5 * kPsec), s), GridMismatch);
  FitSpec tiny = s;
  tiny.window_hi = tiny.window_lo + 100 * kPsec;
  CHECK_THROWS_AS((void)fit(h, g, tiny), InputError);
  FitSpec capped = s;
  capped.max_iterations = 2;
  CHECK_THROWS_AS((void)fit(h, g, capped), NoConvergence);
  // Window entirely before the jump: the amplitude does not enter the model.
  FitSpec blind = s;
  blind.window_hi = 13.8 * kNsec;
  blind.free = {true, true, false, false, false};
  blind.initial[Param::kAlpha] = 0.0;
  CHECK_THROWS_AS((void)fit(h, g, blind), SingularNormalMatrix);
}

TEST_CASE("uniform weights") {
  const Histogram h = synthetic(10);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  FitSpec s = synthetic_spec(h);
  s.weight_mode = WeightMode::kUniform;
  const FitResult r = fit(h, g, s);
  CHECK(r.converged);
  CHECK(std::abs(r.estimates[Param::kBackground] - 10.0) < 5 * r.errors[Param::kBackground]);
}

TEST_CASE("automatic starting values and tail fit") {
  const Histogram h = synthetic(12);
  const DetectorResponse g = gaussian_response(50 * kPsec, h.bin_width);
  const ParamSet guess = auto_initial_guess(h, g);
  CHECK(std::abs(guess[Param::kDelay] - 14 * kNsec) < 30 * kPsec);
  CHECK(guess[Param::kBackground] == doctest::Approx(10.0).epsilon(0.3));
  CHECK(guess[Param::kAlpha] == h.bin_width);
  CHECK(guess[Param::kAmplitude] > 0.0);

  const TailFit tail = fit_tail(h, g, guess[Param::kDelay], guess[Param::kBackground]);
  CHECK(std::abs(tail.tau - 7 * kNsec) < 4 * tail.tau_error);
  CHECK(tail.tau_error > 0.0);

  const FitSpec spec = default_fit_spec(h, g);
  CHECK(spec.initial[Param::kTau] == tail.tau);
  CHECK_FALSE(spec.is_free(Param::kTau));
  const FitResult r = fit(h, g, spec);
  CHECK(std::abs(r.estimates[Param::kAlpha] - 4.7 * kPsec) < 3 * r.errors[Param::kAlpha]);

  // Peak at the very end, and a peak close to the start.
  Histogram rising{10 * kPsec, 0.0, {}};
  for (int i = 0; i < 40; ++i) rising.counts.push_back(i);
  const ParamSet rg = auto_initial_guess(rising, delta_response(10 * kPsec));
  CHECK(rg[Param::kTau] == doctest::Approx(100 * kPsec));
  Histogram early{10 * kPsec, 0.0, std::vector<double>(40, 1.0)};
  early.counts[1] = 50.0;
  const ParamSet eg = auto_initial_guess(early, delta_response(10 * kPsec));
  CHECK(eg[Param::kBackground] == 1.0);
  CHECK_THROWS_AS((void)fit_tail(rising, g, 0.35 * kNsec, 0.0), InputError);
}

TEST_CASE("bootstrap") {
  const DetectorResponse g = gaussian_response(50 * kPsec, 10 * kPsec);
  SUBCASE("argument checks and failure tolerance") {
    const Histogram h = synthetic(13);
    const FitSpec s = synthetic_spec(h);
    CHECK_THROWS_AS((void)bootstrap_uncertainty(h, g, s, 99, 1, 1), InputError);
    FitSpec capped = s;
    capped.max_iterations = 1;
    CHECK_THROWS_AS((void)bootstrap_uncertainty(h, g, capped, 100, 1, 1), NoConvergence);
  }
  SUBCASE("deterministic for any thread count") {
    const Histogram h = synthetic(14);
    FitSpec s = synthetic_spec(h);
    s.free = {true, true, true, false, false};
    const BootstrapResult one = bootstrap_uncertainty(h, g, s, 100, 7, 1);
    const BootstrapResult three = bootstrap_uncertainty(h, g, s, 100, 7, 3);
    CHECK(one.spread.values == three.spread.values);
    CHECK(one.mean.values == three.mean.values);
    CHECK(one.resamples == 100);
    CHECK(one.failed == 0);
    CHECK(one.spread[Param::kAlpha] == 0.0);
    CHECK(bootstrap_uncertainty(h, g, s, 100, 7, 0).spread.values == one.spread.values);
  }
  SUBCASE("spreads shrink as counts grow") {
    const ParamSet truth = reference_params();
    const Histogram base = exact_histogram(truth, g, 13.505 * kNsec, 300);
    Histogram big = base;
    for (double& c : big.counts) c *= 100.0;
    FitSpec s = spec_near(base, truth);
    const BootstrapResult small_b = bootstrap_uncertainty(base, g, s, 100, 3, 1);
    s.initial[Param::kAmplitude] *= 100.0;
    s.initial[Param::kBackground] *= 100.0;
    const BootstrapResult big_b = bootstrap_uncertainty(big, g, s, 100, 3, 1);
    // Expected ratio is exactly 1/10; allow the resampling noise of 100 draws.
    for (const Param p : {Param::kDelay, Param::kAlpha}) {
      CAPTURE(param_name(p));
      CHECK(big_b.spread[p] <= 0.13 * small_b.spread[p]);
      CHECK(big_b.spread[p] >= 0.07 * small_b.spread[p]);
    }
  }
}

TEST_CASE("levenberg-marquardt core") {
  SUBCASE("Rosenbrock") {
    LmProblem prob;
    prob.residual_count = 2;
    prob.lower = {-10.0, -10.0};
    prob.upper = {10.0, 10.0};
    prob.scale = {1.0, 1.0};
    prob.residuals = [](std::span<const double> p, std::span<double> r) {
      r[0] = 10.0 * (p[1] - p[0] * p[0]);
      r[1] = 1.0 - p[0];
    };
    const LmResult res = levenberg_marquardt(prob, {-1.2, 1.0});
    CHECK(res.converged);
    CHECK(res.params[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(res.params[1] == doctest::Approx(1.0).epsilon(1e-8));
    for (std::size_t k = 1; k < res.objective_history.size(); ++k) {
      CHECK(res.objective_history[k] < res.objective_history[k - 1]);
    }
  }
  SUBCASE("active bound") {
    LmProblem prob;
    prob.residual_count = 1;
    prob.lower = {0.5};
    prob.upper = {2.0};
    prob.scale = {1.0};
    prob.residuals = [](std::span<const double> p, std::span<double> r) { r[0] = p[0] - 0.0; };
    const LmResult res = levenberg_marquardt(prob, {1.5});
    CHECK(res.converged);
    CHECK(res.params[0] == 0.5);
    const LmResult clamped = levenberg_marquardt(prob, {7.0});
    CHECK(clamped.params[0] == 0.5);
  }
  SUBCASE("upper bound pins the other way") {
    LmProblem prob;
    prob.residual_count = 1;
    prob.lower = {0.0};
    prob.upper = {1.0};
    prob.scale = {1.0};
    prob.residuals = [](std::span<const double> p, std::span<double> r) { r[0] = p[0] - 3.0; };
    CHECK(levenberg_marquardt(prob, {0.2}).params[0] == 1.0);
  }
  SUBCASE("exact zero residual") {
    LmProblem prob;
    prob.residual_count = 1;
    prob.lower = {-1.0};
    prob.upper = {1.0};
    prob.scale = {1.0};
    prob.residuals = [](std::span<const double> p, std::span<double> r) { r[0] = p[0]; };
    const LmResult res = levenberg_marquardt(prob, {0.0});
    CHECK(res.converged);
    CHECK(res.iterations == 1);
  }
  SUBCASE("no descent possible") {
    // A residual with a wrong gradient stalls the damping loop.
    LmProblem prob;
    prob.residual_count = 1;
    prob.lower = {-10.0};
    prob.upper = {10.0};
    prob.scale = {1.0};
    prob.residuals = [](std::span<const double> p, std::span<double> r) {
      r[0] = 1.0 + 1e-3 * std::max(p[0] - 0.3, 0.0);
    };
    const LmResult res = levenberg_marquardt(prob, {0.3});
    CHECK(res.converged);
    CHECK(res.message == "no further decrease possible");
  }
  SUBCASE("iteration cap") {
    LmProblem prob;
    prob.residual_count = 2;
    prob.lower = {-10.0, -10.0};
    prob.upper = {10.0, 10.0};
    prob.scale = {1.0, 1.0};
    prob.residuals = [](std::span<const double> p, std::span<double> r) {
      r[0] = 10.0 * (p[1] - p[0] * p[0]);
      r[1] = 1.0 - p[0];
    };
    LmOptions opt;
    opt.max_iterations = 1;
    const LmResult res = levenberg_marquardt(prob, {-1.2, 1.0}, opt);
    CHECK_FALSE(res.converged);
    CHECK(res.message == "iteration limit reached");
  }
  SUBCASE("argument checks") {
    LmProblem prob;
    prob.residual_count = 1;
    prob.lower = {0.0};
    prob.upper = {1.0};
    prob.scale = {0.0};
    prob.residuals = [](std::span<const double> p, std::span<double> r) { r[0] = p[0]; };
    CHECK_THROWS_AS((void)levenberg_marquardt(prob, {0.5}), InputError);
    prob.scale = {1.0, 1.0};
    CHECK_THROWS_AS((void)levenberg_marquardt(prob, {0.5}), InputError);
    prob.scale = {1.0};
    prob.residuals = [](std::span<const double>, std::span<double> r) {
      r[0] = std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS((void)levenberg_marquardt(prob, {0.5}), NoConvergence);
  }
}

TEST_CASE("forward Jacobian against central differences") {
  const DetectorResponse g = gaussian_response(50 * kPsec, 10 * kPsec);
  const UniformGrid grid{13.8 * kNsec, 10 * kPsec, 80};
  const ParamSet base = reference_params();
  LmProblem prob;
  prob.residual_count = grid.size;
  prob.lower = {0.0, 0.0, 13 * kNsec, 0.0, 1e-9};
  prob.upper = {1e6, 1e6, 15 * kNsec, 4.7 * kPsec, 1e-6};
  prob.scale = {3000.0, 10.0, 10 * kPsec, 10 * kPsec, 7 * kNsec};
  prob.residuals = [&](std::span<const double> p, std::span<double> r) {
    const auto m = model_curve(make_params(p[0], p[1], p[2], p[3], p[4]), g, grid);
    std::copy(m.begin(), m.end(), r.begin());
  };
  const std::vector<double> p(base.values.begin(), base.values.end());
  std::vector<double> r(grid.size);
  prob.residuals(p, r);
  // alpha sits on its upper bound, so its column is a backward difference.
  const Eigen::MatrixXd jac = forward_jacobian(prob, p, r, 1e-6);
  std::vector<double> probe = p;
  std::vector<double> up(grid.size), down(grid.size);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double h = 1e-4 * prob.scale[j];
    probe[j] = p[j] + h;
    prob.residuals(probe, up);
    probe[j] = p[j] - h;
    prob.residuals(probe, down);
    probe[j] = p[j];
    double worst = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < grid.size; ++i) {
      const double central = (up[i] - down[i]) / (2.0 * h);
      worst = std::max(worst, std::abs(jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - central));
      norm = std::max(norm, std::abs(central));
    }
    CAPTURE(j);
    CHECK(worst <= 1e-3 * norm);
  }
}

}
