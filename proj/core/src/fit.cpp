#include "qjump/fit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <thread>

#include "qjump/error.hpp"
#include "qjump/least_squares.hpp"
#include "qjump/random.hpp"

namespace qjump {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCorrelationEigenFloor = 1e-12;

std::size_t idx(Param p) { return static_cast<std::size_t>(p); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

struct Window {
  std::size_t first = 0;
  std::size_t size = 0;
};

Window select_window(const Histogram& h, double lo, double hi) {
  const double eps = 1e-9 * h.bin_width;
  Window w;
  bool found = false;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double t = h.center(i);
    if (t >= lo - eps && t <= hi + eps) {
      if (!found) w.first = i;
      found = true;
      ++w.size;
    }
  }
  return w;
}

std::vector<double> sqrt_weights(std::span<const double> counts, WeightMode mode) {
  std::vector<double> w(counts.size(), 1.0);
  if (mode == WeightMode::kPoisson) {
    for (std::size_t i = 0; i < counts.size(); ++i) w[i] = 1.0 / std::sqrt(std::max(counts[i], 1.0));
  }
  return w;
}

// Inverse of the normal matrix J^T J via its correlation form; throws when
// the columns are (numerically) linearly dependent.
Eigen::MatrixXd inverse_normal(const Eigen::MatrixXd& jac, const std::vector<std::string>& names) {
  const Eigen::MatrixXd normal = jac.transpose() * jac;
  const Eigen::Index n = normal.rows();
  Eigen::VectorXd d(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(normal(j, j) > 0.0) || !std::isfinite(normal(j, j))) {
      throw SingularNormalMatrix("model does not depend on parameter " +
                                 names[static_cast<std::size_t>(j)]);
    }
    d(j) = 1.0 / std::sqrt(normal(j, j));
  }
  const Eigen::MatrixXd corr = d.asDiagonal() * normal * d.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.eigenvalues().minCoeff() < kCorrelationEigenFloor) {
    throw SingularNormalMatrix("normal matrix is singular: free parameters are not identifiable");
  }
  const Eigen::MatrixXd corr_inv = eig.eigenvectors() *
                                   eig.eigenvalues().cwiseInverse().asDiagonal() *
                                   eig.eigenvectors().transpose();
  return d.asDiagonal() * corr_inv * d.asDiagonal();
}

}  // namespace

std::string_view param_name(Param p) {
  switch (p) {
    case Param::kAmplitude: return "A";
    case Param::kBackground: return "Y0";
    case Param::kDelay: return "dt0";
    case Param::kAlpha: return "alpha";
    case Param::kTau: return "tau";
  }
  return "?";
}

ParamSet make_params(double amplitude, double background, double delay, double alpha, double tau) {
  return ParamSet{{amplitude, background, delay, alpha, tau}};
}

ParamSet default_lower_bounds() { return make_params(0.0, 0.0, -kInf, 0.0, 1e-15); }
ParamSet default_upper_bounds() { return make_params(kInf, kInf, kInf, kInf, kInf); }

std::size_t FitSpec::free_count() const {
  return static_cast<std::size_t>(std::count(free.begin(), free.end(), true));
}

void FitSpec::validate() const {
  if (free_count() == 0) throw InputError("fit needs at least one free parameter");
  for (const Param p : kAllParams) {
    const double v = initial[p];
    if (!std::isfinite(v)) throw NonFiniteInput("initial value of " + std::string(param_name(p)) + " is not finite");
    if (lower[p] > upper[p]) throw InputError("empty bounds for " + std::string(param_name(p)));
    if (v < lower[p] || v > upper[p]) {
      throw InputError("initial value of " + std::string(param_name(p)) + " outside its bounds");
    }
  }
  if (lower[Param::kAlpha] < 0.0) throw InputError("alpha lower bound must be >= 0");
  if (!(lower[Param::kTau] > 0.0)) throw InputError("tau lower bound must be > 0");
  if (lower[Param::kBackground] < 0.0) throw InputError("Y0 lower bound must be >= 0");
  if (lower[Param::kAmplitude] < 0.0) throw InputError("A lower bound must be >= 0");
  if (!(window_lo < window_hi)) throw InputError("fit window must satisfy lo < hi");
  if (max_iterations <= 0) throw InputError("max_iterations must be > 0");
}

std::vector<double> model_curve(const ParamSet& params, const DetectorResponse& g,
                                const UniformGrid& grid, unsigned oversample) {
  g.validate();
  if (std::abs(grid.step - g.bin_width) > 1e-9 * g.bin_width) {
    throw GridMismatch("model grid spacing differs from the response bin width");
  }
  const MonitorParams m{params[Param::kAlpha], params[Param::kTau]};
  const double dt0 = params[Param::kDelay];
  const double bw = grid.step;
  const ConvolutionPadding pad = convolution_padding(g);
  const std::size_t n_ext = grid.size + pad.before + pad.after;
  const double shift = g.phase() * bw;

  const auto position = [&](std::size_t e) {
    return grid.start + (static_cast<double>(e) - static_cast<double>(pad.before)) * bw - shift - dt0;
  };
  std::vector<double> ext(n_ext);
  std::vector<double> acc;
  if (oversample == 0) {
    for (std::size_t e = 0; e < n_ext; ++e) {
      const double t = position(e);
      ext[e] = monitor_integral(t - 0.5 * bw, t + 0.5 * bw, m) / bw;
    }
    acc = convolve(ext, bw, g);
  } else {
    acc.assign(grid.size, 0.0);
    for (unsigned s = 0; s < oversample; ++s) {
      const double sub = ((static_cast<double>(s) + 0.5) / oversample - 0.5) * bw;
      for (std::size_t e = 0; e < n_ext; ++e) ext[e] = monitor(position(e) + sub, m);
      const std::vector<double> out = convolve(ext, bw, g);
      for (std::size_t i = 0; i < grid.size; ++i) acc[i] += out[i] / oversample;
    }
  }
  for (double& v : acc) v = params[Param::kAmplitude] * v + params[Param::kBackground];
  return acc;
}

ParamSet auto_initial_guess(const Histogram& hist, const DetectorResponse& g) {
  hist.validate();
  const std::size_t n = hist.size();
  const auto& c = hist.counts;

  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0;
    const std::size_t hi = std::min(n, i + 3);
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k) s += c[k];
    smooth[i] = s / static_cast<double>(hi - lo);
  }
  const auto peak_idx = static_cast<std::size_t>(
      std::max_element(smooth.begin(), smooth.end()) - smooth.begin());

  const std::size_t margin = std::max<std::size_t>(10, 2 * g.size() + 5);
  std::size_t pre_end = peak_idx > margin ? peak_idx - margin : peak_idx / 2;
  pre_end = std::max<std::size_t>(pre_end, 1);
  const double y0 = median(std::vector<double>(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(pre_end)));

  const double peak = smooth[peak_idx];
  const double half = y0 + 0.5 * (peak - y0);
  std::size_t i = peak_idx;
  while (i > 0 && smooth[i - 1] >= half) --i;
  double dt0 = hist.center(i);
  if (i > 0) {
    const double frac = (half - smooth[i - 1]) / (smooth[i] - smooth[i - 1]);
    dt0 = hist.center(i - 1) + frac * hist.bin_width;
  }

  const double span = hist.center(n - 1) - dt0;
  const double tau = span > 0.0 ? span / 10.0 : 10.0 * hist.bin_width;
  return make_params(std::max(peak - y0, 1.0), std::max(y0, 0.0), dt0, hist.bin_width, tau);
}

TailFit fit_tail(const Histogram& hist, const DetectorResponse& g, double dt0,
                 double background_guess) {
  hist.validate();
  const double fwhm = std::max(g.fwhm(), hist.bin_width);
  const double start = dt0 + 5.0 * fwhm;
  std::size_t first = hist.size();
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist.center(i) > start) {
      first = i;
      break;
    }
  }
  if (first + 10 > hist.size()) throw InputError("too few bins after the rise for a tail fit");
  const std::size_t n = hist.size() - first;
  const std::span<const double> obs(hist.counts.data() + first, n);
  const std::vector<double> w = sqrt_weights(obs, WeightMode::kPoisson);
  const double t_first = hist.center(first);
  const double span = hist.center(hist.size() - 1) - t_first;

  // Starting decay constant from the excess in two adjacent quarters.
  const auto quarter_mean = [&](std::size_t q) {
    const std::size_t len = std::max<std::size_t>(n / 4, 1);
    double s = 0.0;
    for (std::size_t k = q * len; k < std::min(n, (q + 1) * len); ++k) s += obs[k] - background_guess;
    return s / static_cast<double>(len);
  };
  const double e1 = quarter_mean(0);
  const double e2 = quarter_mean(1);
  double tau0 = span / 3.0;
  if (e1 > e2 && e2 > 0.0) tau0 = (span / 4.0) / std::log(e1 / e2);
  const double amp0 = std::max(obs[0] - background_guess, 1.0) * std::exp((t_first - dt0) / tau0);

  LmProblem problem;
  problem.residual_count = n;
  problem.lower = {0.0, 1e-3 * hist.bin_width, 0.0};
  problem.upper = {kInf, 1e3 * (span + (t_first - dt0)), kInf};
  problem.scale = {std::max(amp0, 1.0), tau0, std::max(background_guess, 1.0)};
  problem.residuals = [&](std::span<const double> p, std::span<double> r) {
    for (std::size_t k = 0; k < n; ++k) {
      const double t = hist.center(first + k) - dt0;
      r[k] = w[k] * (p[0] * std::exp(-t / p[1]) + p[2] - obs[k]);
    }
  };
  std::vector<double> start_params{amp0, std::clamp(tau0, problem.lower[1], problem.upper[1]),
                                   std::max(background_guess, 0.0)};
  const LmResult lm = levenberg_marquardt(problem, start_params);
  if (!lm.converged) throw NoConvergence("tail fit: " + lm.message);

  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  problem.residuals(lm.params, std::span<double>(r.data(), n));
  const Eigen::MatrixXd jac =
      forward_jacobian(problem, lm.params, std::span<const double>(r.data(), n), 1e-6);
  const Eigen::MatrixXd cov = inverse_normal(jac, {"A_tail", "tau", "Y0"}) *
                              (lm.objective / static_cast<double>(n - 3));
  return TailFit{lm.params[1], std::sqrt(cov(1, 1)), lm.params[0], lm.params[2]};
}

FitSpec default_fit_spec(const Histogram& hist, const DetectorResponse& g) {
  FitSpec spec;
  spec.initial = auto_initial_guess(hist, g);
  const TailFit tail = fit_tail(hist, g, spec.initial[Param::kDelay], spec.initial[Param::kBackground]);
  spec.initial[Param::kTau] = tail.tau;
  spec.lower = default_lower_bounds();
  spec.upper = default_upper_bounds();
  spec.window_lo = hist.center(0);
  spec.window_hi = hist.center(hist.size() - 1);
  return spec;
}

FitResult fit(const Histogram& hist, const DetectorResponse& g, const FitSpec& spec) {
  hist.validate();
  g.validate();
  spec.validate();
  if (std::abs(hist.bin_width - g.bin_width) > 1e-9 * g.bin_width) {
    throw GridMismatch("histogram bin width differs from the response bin width");
  }

  const Window win = select_window(hist, spec.window_lo, spec.window_hi);
  std::vector<Param> free_params;
  for (const Param p : kAllParams) {
    if (spec.is_free(p)) free_params.push_back(p);
  }
  const std::size_t nf = free_params.size();
  if (win.size < nf + 10) {
    throw InputError("fit window holds " + std::to_string(win.size) + " bins; need at least " +
                     std::to_string(nf + 10));
  }

  const UniformGrid grid{hist.center(win.first), hist.bin_width, win.size};
  const std::span<const double> obs(hist.counts.data() + win.first, win.size);
  const std::vector<double> w = sqrt_weights(obs, spec.weight_mode);

  LmProblem problem;
  problem.residual_count = win.size;
  std::vector<double> start;
  std::vector<std::string> names;
  for (const Param p : free_params) {
    start.push_back(spec.initial[p]);
    problem.lower.push_back(spec.lower[p]);
    problem.upper.push_back(spec.upper[p]);
    names.emplace_back(param_name(p));
    double scale = hist.bin_width;
    if (p == Param::kAmplitude || p == Param::kBackground) scale = std::max(std::abs(spec.initial[p]), 1.0);
    if (p == Param::kTau) scale = std::max(spec.initial[p], hist.bin_width);
    problem.scale.push_back(scale);
  }
  const auto assemble = [&](std::span<const double> p) {
    ParamSet full = spec.initial;
    for (std::size_t j = 0; j < nf; ++j) full[free_params[j]] = p[j];
    return full;
  };
  problem.residuals = [&](std::span<const double> p, std::span<double> r) {
    const std::vector<double> model = model_curve(assemble(p), g, grid, spec.oversample);
    for (std::size_t i = 0; i < win.size; ++i) r[i] = w[i] * (model[i] - obs[i]);
  };

  LmOptions options;
  options.max_iterations = spec.max_iterations;
  // At alpha = 0 the binned model has kinks in dt0; stop on relative chi2.
  options.objective_tolerance = 1e-9;
  LmResult lm = levenberg_marquardt(problem, start, options);
  if (!lm.converged) {
    throw NoConvergence("fit did not converge after " + std::to_string(lm.iterations) +
                        " iterations");
  }

  // An alpha estimate ending on or just above its lower bound is compared with the
  // best fit on the bound itself.
  const auto alpha_pos = std::find(free_params.begin(), free_params.end(), Param::kAlpha);
  if (alpha_pos != free_params.end() && nf > 1) {
    const auto ka = static_cast<std::size_t>(alpha_pos - free_params.begin());
    const double floor = problem.lower[ka];
    if (lm.params[ka] - floor < problem.scale[ka]) {
      const auto erase_alpha = [ka](std::vector<double> v) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(ka));
        return v;
      };
      const auto insert_alpha = [ka, floor](std::span<const double> q) {
        std::vector<double> x(q.begin(), q.end());
        x.insert(x.begin() + static_cast<std::ptrdiff_t>(ka), floor);
        return x;
      };
      LmProblem face;
      face.residual_count = problem.residual_count;
      face.lower = erase_alpha(problem.lower);
      face.upper = erase_alpha(problem.upper);
      face.scale = erase_alpha(problem.scale);
      face.residuals = [&](std::span<const double> q, std::span<double> r) {
        problem.residuals(insert_alpha(q), r);
      };
      const LmResult alt = levenberg_marquardt(face, erase_alpha(lm.params), options);
      if (alt.converged && alt.objective < lm.objective) {
        lm.params = insert_alpha(alt.params);
        lm.objective = alt.objective;
        lm.iterations += alt.iterations;
        for (const double v : alt.objective_history) {
          if (v < lm.objective_history.back()) lm.objective_history.push_back(v);
        }
      }
    }
  }

  FitResult result;
  result.estimates = assemble(lm.params);
  result.free = spec.free;
  result.free_params = free_params;
  result.chi2 = lm.objective;
  result.dof = static_cast<int>(win.size - nf);
  result.n_iter = lm.iterations;
  result.converged = lm.converged;
  result.objective_history = lm.objective_history;
  result.window_first = win.first;
  result.window_size = win.size;

  Eigen::VectorXd r(static_cast<Eigen::Index>(win.size));
  problem.residuals(lm.params, std::span<double>(r.data(), win.size));
  Eigen::MatrixXd jac =
      forward_jacobian(problem, lm.params, std::span<const double>(r.data(), win.size), 1e-6);
  const double variance_scale = result.dof > 0 ? result.chi2 / result.dof : 0.0;

  // Near a bound the local derivative can vanish (alpha enters only
  // quadratically at 0). For a parameter within one standard error of a
  // bound, its column is replaced by a secant slope toward the interior over
  // a step iterated to match the resulting standard error.
  const auto sigma_of = [&](const Eigen::MatrixXd& j_mat, std::size_t j) {
    const Eigen::MatrixXd inv = inverse_normal(j_mat, names);
    const auto jj = static_cast<Eigen::Index>(j);
    return std::sqrt(std::max(variance_scale, 1e-300) * inv(jj, jj));
  };
  std::optional<Eigen::MatrixXd> local_inv;
  try {
    local_inv = inverse_normal(jac, names);
  } catch (const SingularNormalMatrix&) {
  }
  std::vector<double> probe = lm.params;
  Eigen::VectorXd shifted(static_cast<Eigen::Index>(win.size));
  for (std::size_t j = 0; j < nf; ++j) {
    const double to_lower = lm.params[j] - problem.lower[j];
    const double to_upper = problem.upper[j] - lm.params[j];
    result.at_bound[idx(free_params[j])] = to_lower <= 0.0 || to_upper <= 0.0;
    const double gap = std::min(to_lower, to_upper);
    if (!std::isfinite(gap)) continue;
    if (local_inv) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double sigma = std::sqrt(std::max(variance_scale, 1e-300) * (*local_inv)(jj, jj));
      if (gap > sigma) continue;
    }
    const double sign = to_lower <= to_upper ? 1.0 : -1.0;
    double h = problem.scale[j];
    for (int it = 0; it < 20; ++it) {
      probe[j] = lm.params[j] + sign * h;
      problem.residuals(probe, std::span<double>(shifted.data(), win.size));
      probe[j] = lm.params[j];
      jac.col(static_cast<Eigen::Index>(j)) = (shifted - r) / (sign * h);
      const double next = std::clamp(sigma_of(jac, j), 1e-3 * problem.scale[j], 1e3 * problem.scale[j]);
      if (std::abs(next - h) <= 0.01 * h) break;
      h = next;
    }
  }

  result.covariance = inverse_normal(jac, names) * variance_scale;
  for (std::size_t j = 0; j < nf; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    result.errors[free_params[j]] = std::sqrt(std::max(0.0, result.covariance(jj, jj)));
  }
  result.rise_time = rise_time_10_90(result.estimates[Param::kAlpha]);
  result.rise_time_error = rise_time_10_90(result.errors[Param::kAlpha]);
  return result;
}

BootstrapResult bootstrap_uncertainty(const Histogram& hist, const DetectorResponse& g,
                                      const FitSpec& spec, int n_resamples, std::uint64_t seed,
                                      unsigned threads) {
  if (n_resamples < 100) throw InputError("bootstrap needs at least 100 resamples");
  hist.validate();
  spec.validate();

  std::vector<std::optional<ParamSet>> outcomes(static_cast<std::size_t>(n_resamples));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int k = next++; k < n_resamples; k = next++) {
      std::mt19937_64 rng(derive_seed(seed, "bootstrap", static_cast<std::uint64_t>(k)));
      Histogram resampled = hist;
      for (double& c : resampled.counts) {
        if (c > 0.0) c = static_cast<double>(std::poisson_distribution<long>(c)(rng));
      }
      try {
        outcomes[static_cast<std::size_t>(k)] = fit(resampled, g, spec).estimates;
      } catch (const NumericalError&) {
        outcomes[static_cast<std::size_t>(k)] = std::nullopt;
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  BootstrapResult out;
  out.resamples = n_resamples;
  std::vector<ParamSet> ok;
  for (const auto& o : outcomes) {
    if (o) {
      ok.push_back(*o);
    } else {
      ++out.failed;
    }
  }
  if (out.failed > n_resamples / 20) {
    throw NoConvergence(std::to_string(out.failed) + " of " + std::to_string(n_resamples) +
                        " bootstrap refits failed");
  }
  for (const Param p : kAllParams) {
    if (!spec.is_free(p)) continue;
    double mean = 0.0;
    for (const ParamSet& s : ok) mean += s[p];
    mean /= static_cast<double>(ok.size());
    double var = 0.0;
    for (const ParamSet& s : ok) var += (s[p] - mean) * (s[p] - mean);
    out.mean[p] = mean;
    out.spread[p] = std::sqrt(var / static_cast<double>(ok.size() - 1));
  }
  return out;
}

}  // namespace qjump
