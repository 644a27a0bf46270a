#include "qjump/least_squares.hpp"

#include <algorithm>
#include <cmath>

#include "qjump/error.hpp"

namespace qjump {
namespace {

void evaluate(const LmProblem& problem, std::span<const double> p, Eigen::VectorXd& r) {
  r.resize(static_cast<Eigen::Index>(problem.residual_count));
  problem.residuals(p, std::span<double>(r.data(), problem.residual_count));
}

}  // namespace

Eigen::MatrixXd forward_jacobian(const LmProblem& problem, std::span<const double> params,
                                 std::span<const double> residuals, double relative_step) {
  const std::size_t n = params.size();
  const auto m = static_cast<Eigen::Index>(problem.residual_count);
  Eigen::MatrixXd jac(m, static_cast<Eigen::Index>(n));
  std::vector<double> probe(params.begin(), params.end());
  Eigen::VectorXd shifted;
  for (std::size_t j = 0; j < n; ++j) {
    double h = std::max(relative_step * std::abs(params[j]), relative_step * problem.scale[j]);
    if (params[j] + h > problem.upper[j]) h = -h;
    probe[j] = params[j] + h;
    evaluate(problem, probe, shifted);
    for (Eigen::Index i = 0; i < m; ++i) {
      jac(i, static_cast<Eigen::Index>(j)) = (shifted(i) - residuals[static_cast<std::size_t>(i)]) / h;
    }
    probe[j] = params[j];
  }
  return jac;
}

LmResult levenberg_marquardt(const LmProblem& problem, std::vector<double> p,
                             const LmOptions& options) {
  const std::size_t n = p.size();
  if (problem.lower.size() != n || problem.upper.size() != n || problem.scale.size() != n) {
    throw InputError("least-squares bounds and scales must match the parameter count");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!(problem.scale[j] > 0.0)) throw InputError("parameter scales must be positive");
    p[j] = std::clamp(p[j], problem.lower[j], problem.upper[j]);
  }

  LmResult result;
  Eigen::VectorXd r;
  evaluate(problem, p, r);
  double f = r.squaredNorm();
  if (!std::isfinite(f)) throw NoConvergence("objective is not finite at the starting point");
  result.objective_history.push_back(f);

  const Eigen::Map<const Eigen::VectorXd> scale(problem.scale.data(), static_cast<Eigen::Index>(n));
  double lambda = -1.0;
  double nu = 2.0;
  std::vector<double> trial(n);
  Eigen::VectorXd r_trial;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;
    const Eigen::MatrixXd jac =
        forward_jacobian(problem, p, std::span<const double>(r.data(), problem.residual_count),
                         options.relative_step) *
        scale.asDiagonal();
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    // Parameters pinned at a bound with the descent direction pointing out.
    std::vector<Eigen::Index> free_idx;
    double cosine = 0.0;
    const double rnorm = r.norm();
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const bool pinned = (p[j] <= problem.lower[j] && grad(jj) > 0.0) ||
                          (p[j] >= problem.upper[j] && grad(jj) < 0.0);
      if (pinned) continue;
      free_idx.push_back(jj);
      const double cn = jac.col(jj).norm();
      if (cn > 0.0 && rnorm > 0.0) cosine = std::max(cosine, std::abs(grad(jj)) / (cn * rnorm));
    }
    result.gradient_cosine = cosine;
    if (rnorm == 0.0 || free_idx.empty() || cosine < options.gradient_tolerance) {
      result.converged = true;
      result.message = "gradient below tolerance";
      break;
    }

    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd a(nf, nf);
    Eigen::VectorXd b(nf);
    for (Eigen::Index u = 0; u < nf; ++u) {
      b(u) = -grad(free_idx[static_cast<std::size_t>(u)]);
      for (Eigen::Index v = 0; v < nf; ++v) {
        a(u, v) = normal(free_idx[static_cast<std::size_t>(u)], free_idx[static_cast<std::size_t>(v)]);
      }
    }
    const double max_diag = a.diagonal().maxCoeff();
    if (lambda < 0.0) lambda = 1e-3;

    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index u = 0; u < nf; ++u) {
        damped(u, u) += lambda * std::max(a(u, u), 1e-12 * max_diag);
      }
      // Parameters whose step would leave the box are placed on the bound
      // and the remaining ones re-solved with that displacement fixed.
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(nf);
      std::vector<bool> fixed(static_cast<std::size_t>(nf), false);
      for (;;) {
        std::vector<Eigen::Index> open;
        for (Eigen::Index u = 0; u < nf; ++u) {
          if (!fixed[static_cast<std::size_t>(u)]) open.push_back(u);
        }
        if (open.empty()) break;
        const auto no = static_cast<Eigen::Index>(open.size());
        Eigen::MatrixXd sub(no, no);
        Eigen::VectorXd rhs(no);
        for (Eigen::Index x = 0; x < no; ++x) {
          rhs(x) = b(open[static_cast<std::size_t>(x)]);
          for (Eigen::Index u = 0; u < nf; ++u) {
            if (fixed[static_cast<std::size_t>(u)]) rhs(x) -= damped(open[static_cast<std::size_t>(x)], u) * delta(u);
          }
          for (Eigen::Index y = 0; y < no; ++y) {
            sub(x, y) = damped(open[static_cast<std::size_t>(x)], open[static_cast<std::size_t>(y)]);
          }
        }
        const Eigen::VectorXd part = sub.ldlt().solve(rhs);
        bool clipped = false;
        for (Eigen::Index x = 0; x < no; ++x) {
          const Eigen::Index u = open[static_cast<std::size_t>(x)];
          const auto j = static_cast<std::size_t>(free_idx[static_cast<std::size_t>(u)]);
          const double target = p[j] + problem.scale[j] * part(x);
          const double bounded = std::clamp(target, problem.lower[j], problem.upper[j]);
          delta(u) = (bounded - p[j]) / problem.scale[j];
          if (bounded != target) {
            fixed[static_cast<std::size_t>(u)] = true;
            clipped = true;
          }
        }
        if (!clipped) break;
      }

      Eigen::VectorXd step = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      trial = p;
      for (Eigen::Index u = 0; u < nf; ++u) {
        const auto j = static_cast<std::size_t>(free_idx[static_cast<std::size_t>(u)]);
        trial[j] = std::clamp(p[j] + problem.scale[j] * delta(u), problem.lower[j], problem.upper[j]);
        step(static_cast<Eigen::Index>(j)) = (trial[j] - p[j]) / problem.scale[j];
      }
      evaluate(problem, trial, r_trial);
      const double f_trial = r_trial.squaredNorm();

      if (std::isfinite(f_trial) && f_trial < f) {
        const double predicted = -(2.0 * grad.dot(step) + step.dot(normal * step));
        const double rho = predicted > 0.0 ? (f - f_trial) / predicted : 0.0;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        lambda = std::max(lambda, 1e-15);
        nu = 2.0;

        const double decrease = f - f_trial;
        double pnorm = 0.0;
        for (std::size_t j = 0; j < n; ++j) pnorm += std::pow(p[j] / problem.scale[j], 2);
        const bool tiny_step =
            step.norm() <= options.step_tolerance * (std::sqrt(pnorm) + options.step_tolerance);
        // Flat valley: neither the step taken nor the local model promises
        // any further relative decrease.
        const bool flat = predicted <= options.objective_tolerance * f;
        const bool small = decrease <= options.objective_tolerance * f && (tiny_step || flat);
        p = trial;
        r = r_trial;
        f = f_trial;
        result.objective_history.push_back(f);
        accepted = true;
        if (small) {
          result.converged = true;
          result.message = "objective and step below tolerance";
        }
      } else {
        lambda *= nu;
        nu *= 2.0;
        if (lambda > 1e20) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      result.converged = true;
      result.message = "no further decrease possible";
      break;
    }
    if (result.converged) break;
  }
  if (!result.converged) result.message = "iteration limit reached";

  result.params = p;
  result.objective = f;
  return result;
}

}  // namespace qjump
