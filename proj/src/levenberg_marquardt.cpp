#include "stomem/levenberg_marquardt.hpp"

#include <algorithm>
#include <cmath>

namespace stomem {

LmReport levenberg_marquardt(const ResidualFunction& f, Eigen::VectorXd x0, Eigen::Index n_residuals,
                             const LmOptions& options) {
  const Eigen::Index n = x0.size();
  LmReport report;
  report.x = std::move(x0);

  Eigen::VectorXd r(n_residuals);
  Eigen::MatrixXd jac(n_residuals, n);
  f(report.x, r, &jac);
  report.cost = 0.5 * r.squaredNorm();
  if (!std::isfinite(report.cost)) {
    report.stop = LmStop::Stalled;
    return report;
  }
  if (report.cost <= options.cost_tolerance) {
    report.converged = true;
    report.stop = LmStop::CostTolerance;
    return report;
  }

  Eigen::VectorXd scale = jac.colwise().norm().transpose();
  double mu = options.initial_damping;
  double nu = 2.0;
  Eigen::VectorXd r_trial(n_residuals);
  Eigen::MatrixXd augmented(n_residuals + n, n);
  Eigen::VectorXd rhs(n_residuals + n);

  for (report.iterations = 0; report.iterations < options.max_iterations;) {
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-300) {
      report.converged = true;
      report.stop = LmStop::Gradient;
      return report;
    }
    const Eigen::VectorXd col_norms = jac.colwise().norm().transpose();
    scale = scale.cwiseMax(col_norms);
    const double floor = std::max(scale.maxCoeff(), 1e-300) * 1e-10;
    const Eigen::VectorXd d = scale.cwiseMax(floor);

    augmented.topRows(n_residuals) = jac;
    augmented.bottomRows(n) = (std::sqrt(mu) * d).asDiagonal();
    rhs.head(n_residuals) = -r;
    rhs.tail(n).setZero();
    const Eigen::VectorXd step = augmented.colPivHouseholderQr().solve(rhs);
    ++report.iterations;

    const Eigen::VectorXd x_trial = report.x + step;
    f(x_trial, r_trial, nullptr);
    const double cost_trial = 0.5 * r_trial.squaredNorm();
    // Predicted reduction of the damped linear model.
    const double predicted =
        0.5 * step.dot(mu * d.cwiseProduct(d).cwiseProduct(step) - grad);
    const double actual = report.cost - cost_trial;

    if (std::isfinite(cost_trial) && actual > 0.0 && predicted > 0.0) {
      const double rho = actual / predicted;
      const double step_norm = step.norm();
      const double x_norm = report.x.norm();
      const double old_cost = report.cost;
      report.x = x_trial;
      r = r_trial;
      report.cost = cost_trial;
      f(report.x, r, &jac);
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      if (report.cost <= options.cost_tolerance) {
        report.converged = true;
        report.stop = LmStop::CostTolerance;
        return report;
      }
      if (step_norm <= options.step_tolerance * (x_norm + options.step_tolerance)) {
        report.converged = true;
        report.stop = LmStop::StepTolerance;
        return report;
      }
      if (actual <= options.reduction_tolerance * old_cost) {
        report.converged = true;
        report.stop = LmStop::ReductionTolerance;
        return report;
      }
    } else {
      mu *= nu;
      nu *= 2.0;
      if (!(mu < 1e30)) {
        // No downhill step exists at any damping: a numerical minimum.
        report.converged = true;
        report.stop = LmStop::Stalled;
        return report;
      }
    }
  }
  report.stop = LmStop::MaxIterations;
  return report;
}

}  // namespace stomem
