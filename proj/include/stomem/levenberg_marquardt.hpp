#pragma once

#include <functional>

#include <Eigen/Dense>

namespace stomem {

/// Fills the residual vector and, when `jacobian` is non-null, the
/// residual Jacobian (rows = residuals, cols = parameters).
using ResidualFunction =
    std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& residuals,
                       Eigen::MatrixXd* jacobian)>;

struct LmOptions {
  int max_iterations = 500;
  /// Converged when an accepted step satisfies |dx| <= step_tolerance * (|x| + step_tolerance).
  double step_tolerance = 1e-8;
  /// Converged when an accepted step lowers the cost by less than this fraction.
  double reduction_tolerance = 1e-12;
  /// Converged when the cost (0.5 * |r|^2) falls below this absolute value.
  double cost_tolerance = 0.0;
  double initial_damping = 1e-3;
};

enum class LmStop { StepTolerance, ReductionTolerance, CostTolerance, Gradient, MaxIterations, Stalled };

struct LmReport {
  Eigen::VectorXd x;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  LmStop stop = LmStop::MaxIterations;
};

/// Damped Gauss-Newton with Marquardt diagonal scaling and Nielsen's damping
/// update. Each step solves the augmented least-squares system
/// [J; sqrt(mu) D] dx = [-r; 0] by column-pivoted QR, which tolerates
/// parameters that temporarily have no influence on the residuals.
LmReport levenberg_marquardt(const ResidualFunction& f, Eigen::VectorXd x0, Eigen::Index n_residuals,
                             const LmOptions& options = {});

}  // namespace stomem
