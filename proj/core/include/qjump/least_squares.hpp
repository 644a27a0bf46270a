#pragma once

// Bound-constrained Levenberg-Marquardt on weighted residuals, with
// forward-difference Jacobians.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qjump {

/// Fills `residuals` (already weighted) for the given parameters.
using ResidualFunction = std::function<void(std::span<const double>, std::span<double>)>;

struct LmOptions {
  int max_iterations = 200;
  /// Forward-difference step is max(relative_step * |p|, relative_step * scale).
  double relative_step = 1e-6;
  /// Convergence on the largest cosine between a Jacobian column and the residual.
  double gradient_tolerance = 1e-9;
  /// Convergence on relative objective decrease together with either a small
  /// relative step or a small predicted relative decrease.
  double objective_tolerance = 1e-13;
  double step_tolerance = 1e-10;
};

struct LmProblem {
  ResidualFunction residuals;
  std::size_t residual_count = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  /// Typical magnitude per parameter; sets the Jacobian floor step and the
  /// internal scaling.
  std::vector<double> scale;
};

struct LmResult {
  std::vector<double> params;
  double objective = 0.0;  ///< sum of squared residuals
  int iterations = 0;
  bool converged = false;
  double gradient_cosine = 0.0;
  /// Objective after every accepted step, starting with the initial point.
  std::vector<double> objective_history;
  std::string message;
};

/// Forward-difference Jacobian d r_i / d p_j. Steps that would leave the box
/// are taken backwards instead.
[[nodiscard]] Eigen::MatrixXd forward_jacobian(const LmProblem& problem,
                                               std::span<const double> params,
                                               std::span<const double> residuals,
                                               double relative_step);

[[nodiscard]] LmResult levenberg_marquardt(const LmProblem& problem, std::vector<double> start,
                                           const LmOptions& options = {});

}  // namespace qjump
