#pragma once

#include <Eigen/Dense>

#include "dcsieve/data.hpp"

namespace dcsieve {

/// Which records count as events in the partial likelihood.
///   Failure:   e_i = R_i.
///   Censoring: e_i = 1 - R_i, except records censored exactly at tau,
///              which are administrative exits and carry e_i = 0.
enum class EventRole { Failure, Censoring };

struct CoxOptions {
  int max_iterations = 50;
  double score_tolerance = 1e-8;
};

struct CoxFit {
  CovariateSet covariates;
  EventRole role = EventRole::Failure;
  Eigen::VectorXd coef;
  /// Observed information (negative Hessian of the log partial likelihood, summed over records).
  Eigen::MatrixXd info;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Columns that are constant over the data; their coefficients are fixed at 0.
  std::vector<bool> constant;
};

/// Event indicator of record i under `role`.
bool is_event(const Dataset& data, std::size_t i, EventRole role);

/// Log partial likelihood (Breslow ties) at `coef` for the selected covariates.
double cox_loglik(const Dataset& data, EventRole role, const CovariateSet& covariates, const Eigen::VectorXd& coef);

/// Newton-Raphson with step halving. Throws std::runtime_error on zero events,
/// singular information or non-convergence.
CoxFit fit_cox(const Dataset& data, EventRole role, const CovariateSet& covariates, const CoxOptions& options = {});

/// Per-record influence vectors S_i = (info/n)^{-1} U_i, with U_i the martingale
/// residual score. Row i of the result is S_i; the rows sum to ~0 at the maximizer
/// and the deletion shift of the coefficient is about -S_i / n.
Eigen::MatrixXd cox_influence(const CoxFit& fit, const Dataset& data);

/// Cox coefficient of V with failures as events and V as the only covariate.
double naive_alpha(const Dataset& data);

}  // namespace dcsieve
