#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dcsieve {

struct OptimizerOptions {
  /// Stop when the accepted step is shorter than this (Euclidean norm).
  double step_tolerance = 1e-6;
  /// Stop when the quasi-Newton search direction is shorter than this.
  double direction_tolerance = 1e-6;
  int max_iterations = 200;
  /// Strong Wolfe constants.
  double armijo = 1e-4;
  double curvature = 0.9;
  int max_line_search = 30;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string reason;
  /// Objective after each accepted step, starting with the initial point.
  std::vector<double> trace;
};

/// f(x, grad) returns the value and writes the gradient when grad != nullptr.
using ValueAndGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

/// BFGS ascent with a strong-Wolfe line search inside the box [lower, upper].
/// Coordinates sitting on a bound with the direction pointing outward are frozen
/// for that iteration.
OptimizerResult bfgs_maximize(const ValueAndGradient& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper, const OptimizerOptions& options = {});

}  // namespace dcsieve
