#include <doctest.h>

#include <cmath>

#include "stomem/levenberg_marquardt.hpp"

using namespace stomem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("linear least squares is solved in one or two steps") {
  // y = 2 + 3x on five points
  const VectorXd x = (VectorXd(5) << 0, 1, 2, 3, 4).finished();
  auto f = [&](const VectorXd& p, VectorXd& r, MatrixXd* j) {
    for (int i = 0; i < 5; ++i) {
      r[i] = p[0] + p[1] * x[i] - (2.0 + 3.0 * x[i]);
      if (j) {
        (*j)(i, 0) = 1.0;
        (*j)(i, 1) = x[i];
      }
    }
  };
  const LmReport rep = levenberg_marquardt(f, VectorXd::Zero(2), 5);
  CHECK(rep.converged);
  CHECK(rep.x[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(rep.x[1] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(rep.iterations < 20);
}

TEST_CASE("Rosenbrock") {
  auto f = [](const VectorXd& p, VectorXd& r, MatrixXd* j) {
    r[0] = 10.0 * (p[1] - p[0] * p[0]);
    r[1] = 1.0 - p[0];
    if (j) {
      (*j)(0, 0) = -20.0 * p[0];
      (*j)(0, 1) = 10.0;
      (*j)(1, 0) = -1.0;
      (*j)(1, 1) = 0.0;
    }
  };
  const LmReport rep = levenberg_marquardt(f, (VectorXd(2) << -1.2, 1.0).finished(), 2);
  CHECK(rep.converged);
  CHECK(rep.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("exponential decay with an inert parameter") {
  // The third parameter never enters the residuals.
  auto f = [](const VectorXd& p, VectorXd& r, MatrixXd* j) {
    for (int i = 0; i < 30; ++i) {
      const double t = 0.2 * i;
      const double e = std::exp(-t / p[1]);
      r[i] = p[0] * e - 4.0 * std::exp(-t / 1.5);
      if (j) {
        (*j)(i, 0) = e;
        (*j)(i, 1) = p[0] * e * t / (p[1] * p[1]);
        (*j)(i, 2) = 0.0;
      }
    }
  };
  const LmReport rep = levenberg_marquardt(f, (VectorXd(3) << 1.0, 0.5, 7.0).finished(), 30);
  CHECK(rep.converged);
  CHECK(rep.x[0] == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(rep.x[1] == doctest::Approx(1.5).epsilon(1e-8));
  CHECK(rep.x[2] == 7.0);
}

TEST_CASE("iteration cap is reported") {
  auto f = [](const VectorXd& p, VectorXd& r, MatrixXd* j) {
    r[0] = 10.0 * (p[1] - p[0] * p[0]);
    r[1] = 1.0 - p[0];
    if (j) {
      (*j)(0, 0) = -20.0 * p[0];
      (*j)(0, 1) = 10.0;
      (*j)(1, 0) = -1.0;
      (*j)(1, 1) = 0.0;
    }
  };
  LmOptions opts;
  opts.max_iterations = 2;
  const LmReport rep = levenberg_marquardt(f, (VectorXd(2) << -1.2, 1.0).finished(), 2, opts);
  CHECK_FALSE(rep.converged);
  CHECK(rep.stop == LmStop::MaxIterations);
  CHECK(rep.iterations == 2);
}

TEST_CASE("cost tolerance stops at an exact fit") {
  auto f = [](const VectorXd& p, VectorXd& r, MatrixXd* j) {
    r[0] = p[0] - 1.0;
    if (j) (*j)(0, 0) = 1.0;
  };
  LmOptions opts;
  opts.cost_tolerance = 1e-20;
  const LmReport rep = levenberg_marquardt(f, VectorXd::Constant(1, 1.0), 1, opts);
  CHECK(rep.converged);
  CHECK(rep.stop == LmStop::CostTolerance);
  CHECK(rep.iterations == 0);
}
