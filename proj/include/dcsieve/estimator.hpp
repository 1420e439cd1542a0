#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcsieve/cox.hpp"
#include "dcsieve/likelihood.hpp"
#include "dcsieve/optimizer.hpp"
#include "dcsieve/sieve.hpp"

namespace dcsieve {

struct EstimatorConfig {
  int m = 3;
  int kn = 5;
  double penalty_weight = 1e-3;
  QuadratureRule rule;
  int u_points = kDefaultUPoints;
  double alpha_init = 1.0;
  double bigM = 10.0;
  VMode v_mode = VMode::Auto;
  double support_window = 0.1;
  OptimizerOptions optimizer;
  /// eps_n = eps_scale * n^{-1/2}; eps_tilde_n = eps_tilde_scale * n^{-1/3}.
  double eps_scale = 1.0;
  double eps_tilde_scale = 1.0;

  ObjectiveOptions objective_options() const { return {penalty_weight, rule, u_points}; }
};

struct FitResult {
  double alpha_hat = 0.0;
  SieveParams params;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string stop_reason;
  double final_objective = 0.0;
  std::array<double, 3> coef_l1_norms{};
  double alpha_init = 1.0;
  /// Objective after each accepted step.
  std::vector<double> trace;
};

/// Reduced data and objective for a given gamma.
Objective build_objective(const Dataset& data, const CovariateSet& covariates, const Eigen::VectorXd& gamma,
                          const EstimatorConfig& config);

/// Maximize the penalized objective from alpha = alpha_init and zero spline
/// coefficients (or from `warm`). With `fixed_alpha`, alpha is held constant.
FitResult maximize_objective(const Objective& objective, const EstimatorConfig& config,
                             const SieveParams* warm = nullptr, std::optional<double> fixed_alpha = std::nullopt);

/// Full fit on a dataset using the censoring working-model fit for gamma.
FitResult maximize(const Dataset& data, const CoxFit& gamma_fit, const EstimatorConfig& config);

/// Refits around a full fit: pl_n(alpha, gamma), psi_hat(alpha, gamma) and alpha_hat(gamma).
class ProfileContext {
 public:
  ProfileContext(const Dataset& data, const CoxFit& gamma_fit, const FitResult& fit, const EstimatorConfig& config);

  const FitResult& fit() const { return fit_; }
  const Objective& objective() const { return objective_; }
  std::size_t n() const { return data_.size(); }

  /// psi maximizing the objective with alpha and gamma held fixed (warm-started at the full fit).
  FitResult profile_psi(double alpha, const Eigen::VectorXd& gamma) const;
  FitResult profile_psi(double alpha) const;
  /// alpha maximizing pl_n(., gamma).
  double profile_alpha(const Eigen::VectorXd& gamma) const;
  /// Profiled penalized objective.
  double pl(double alpha) const;

  double default_eps() const;
  double default_eps_tilde() const;

 private:
  const Dataset& data_;
  const CoxFit& gamma_fit_;
  FitResult fit_;
  EstimatorConfig config_;
  Objective objective_;
};

/// -(pl(a+e) - 2 pl(a) + pl(a-e)) / e^2 for any profiled curve.
double second_difference_information(double pl_minus, double pl_center, double pl_plus, double eps);

struct VarianceEstimate {
  double sigma_hat = 0.0;
  Eigen::VectorXd omega_hat;
  Eigen::VectorXd per_obs_score;
  Eigen::VectorXd influence;
  double variance = 0.0;
  double se = 0.0;
  double eps = 0.0;
  double eps_tilde = 0.0;
};

/// Throws std::runtime_error when the curvature is not positive.
double sigma_hat(const ProfileContext& ctx, double eps);
/// Per-record (l_i(psi(a+e), a+e) - l_i(psi(a), a)) / e.
Eigen::VectorXd score_contrib(const ProfileContext& ctx, double eps);
/// (alpha_hat(gamma + e_j eps_tilde) - alpha_hat) / eps_tilde for every gamma direction.
Eigen::VectorXd omega_hat(const ProfileContext& ctx, const CoxFit& gamma_fit, double eps_tilde);
/// Combine the pieces: influence_i = score_i / sigma + omega' S_i; variance = mean of squares.
VarianceEstimate combine_variance(double sigma, const Eigen::VectorXd& score, const Eigen::VectorXd& omega,
                                  const Eigen::MatrixXd& cox_influence_rows);
VarianceEstimate variance(const Dataset& data, const ProfileContext& ctx, const CoxFit& gamma_fit, double eps,
                          double eps_tilde);

std::string fit_to_json(const FitResult& fit);
std::string variance_to_json(const VarianceEstimate& var);

}  // namespace dcsieve
