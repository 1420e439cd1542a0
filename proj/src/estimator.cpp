#include "dcsieve/estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace dcsieve {

Objective build_objective(const Dataset& data, const CovariateSet& covariates, const Eigen::VectorXd& gamma,
                          const EstimatorConfig& config) {
  data.validate_for_fitting();
  const SupportBounds bounds = estimate_support(data, covariates, gamma, config.v_mode, config.support_window);
  ReducedSample sample = reduce(data, covariates, gamma, bounds);
  SieveLayout layout = make_layout(data, config.m, config.kn, config.v_mode);
  return Objective(std::move(sample), std::move(layout), config.objective_options());
}

FitResult maximize_objective(const Objective& objective, const EstimatorConfig& config, const SieveParams* warm,
                             std::optional<double> fixed_alpha) {
  SieveParams start = warm ? *warm : SieveParams::zeros(objective.layout(), config.alpha_init, config.bigM);
  start.bigM = config.bigM;
  if (fixed_alpha) start.alpha = *fixed_alpha;
  if (std::abs(start.alpha) > config.bigM) throw std::invalid_argument("maximize: |alpha| exceeds the bound M");
  start.pin();

  const Eigen::VectorXd packed = start.pack();
  const Eigen::Index offset = fixed_alpha ? 1 : 0;
  const Eigen::Index dim = packed.size() - offset;
  Eigen::VectorXd lower = Eigen::VectorXd::Constant(dim, -std::numeric_limits<double>::infinity());
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
  if (!fixed_alpha) {
    lower[0] = -config.bigM;
    upper[0] = config.bigM;
  }

  SieveParams work = start;
  Eigen::VectorXd full(packed.size());
  Eigen::VectorXd full_grad;
  bool first = true;
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) -> double {
    if (fixed_alpha) {
      full[0] = *fixed_alpha;
      full.tail(dim) = x;
    } else {
      full = x;
    }
    work.unpack(full);
    try {
      const double val = objective.value_and_gradient(work, grad ? &full_grad : nullptr);
      if (grad) *grad = full_grad.tail(dim);
      first = false;
      return val;
    } catch (const std::runtime_error&) {
      // Trial points far outside the data range can overflow; the line search backs off.
      if (first) throw;
      if (grad) grad->setZero(dim);
      return -std::numeric_limits<double>::infinity();
    }
  };

  const OptimizerResult opt = bfgs_maximize(f, packed.tail(dim), lower, upper, config.optimizer);

  FitResult fit;
  fit.params = start;
  if (fixed_alpha) {
    full[0] = *fixed_alpha;
    full.tail(dim) = opt.x;
  } else {
    full = opt.x;
  }
  fit.params.unpack(full);
  fit.alpha_hat = fit.params.alpha;
  fit.iterations = opt.iterations;
  fit.evaluations = opt.evaluations;
  fit.converged = opt.converged;
  fit.stop_reason = opt.reason;
  fit.final_objective = opt.value;
  fit.coef_l1_norms = fit.params.l1_norms();
  fit.alpha_init = start.alpha;
  fit.trace = opt.trace;
  if (!std::isfinite(fit.final_objective)) throw std::runtime_error("maximize: objective is not finite");
  return fit;
}

FitResult maximize(const Dataset& data, const CoxFit& gamma_fit, const EstimatorConfig& config) {
  if (!gamma_fit.converged) throw std::invalid_argument("maximize: working-model fit did not converge");
  const Objective objective = build_objective(data, gamma_fit.covariates, gamma_fit.coef, config);
  return maximize_objective(objective, config);
}

ProfileContext::ProfileContext(const Dataset& data, const CoxFit& gamma_fit, const FitResult& fit,
                               const EstimatorConfig& config)
    : data_(data),
      gamma_fit_(gamma_fit),
      fit_(fit),
      config_(config),
      objective_(build_objective(data, gamma_fit.covariates, gamma_fit.coef, config)) {}

FitResult ProfileContext::profile_psi(double alpha) const {
  return maximize_objective(objective_, config_, &fit_.params, alpha);
}

FitResult ProfileContext::profile_psi(double alpha, const Eigen::VectorXd& gamma) const {
  if (gamma == gamma_fit_.coef) return profile_psi(alpha);
  const Objective obj = build_objective(data_, gamma_fit_.covariates, gamma, config_);
  return maximize_objective(obj, config_, &fit_.params, alpha);
}

double ProfileContext::profile_alpha(const Eigen::VectorXd& gamma) const {
  // max over alpha of max over psi equals the joint maximum; warm start keeps it local.
  if (gamma == gamma_fit_.coef) return maximize_objective(objective_, config_, &fit_.params).alpha_hat;
  const Objective obj = build_objective(data_, gamma_fit_.covariates, gamma, config_);
  return maximize_objective(obj, config_, &fit_.params).alpha_hat;
}

double ProfileContext::pl(double alpha) const { return profile_psi(alpha).final_objective; }

double ProfileContext::default_eps() const {
  return config_.eps_scale / std::sqrt(static_cast<double>(data_.size()));
}

double ProfileContext::default_eps_tilde() const {
  return config_.eps_tilde_scale / std::cbrt(static_cast<double>(data_.size()));
}

double second_difference_information(double pl_minus, double pl_center, double pl_plus, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("second difference: eps must be positive");
  return -(pl_plus - 2.0 * pl_center + pl_minus) / (eps * eps);
}

double sigma_hat(const ProfileContext& ctx, double eps) {
  const double a = ctx.fit().alpha_hat;
  const double s = second_difference_information(ctx.pl(a - eps), ctx.fit().final_objective, ctx.pl(a + eps), eps);
  if (!(s > 0.0)) throw std::runtime_error("sigma_hat: profiled curvature is not positive");
  return s;
}

Eigen::VectorXd score_contrib(const ProfileContext& ctx, double eps) {
  const FitResult plus = ctx.profile_psi(ctx.fit().alpha_hat + eps);
  const Eigen::VectorXd l_plus = ctx.objective().per_observation(plus.params);
  const Eigen::VectorXd l_center = ctx.objective().per_observation(ctx.fit().params);
  return (l_plus - l_center) / eps;
}

Eigen::VectorXd omega_hat(const ProfileContext& ctx, const CoxFit& gamma_fit, double eps_tilde) {
  if (!(eps_tilde > 0.0)) throw std::invalid_argument("omega_hat: eps_tilde must be positive");
  const Eigen::Index k = gamma_fit.coef.size();
  Eigen::VectorXd omega(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd gamma = gamma_fit.coef;
    gamma[j] += eps_tilde;
    omega[j] = (ctx.profile_alpha(gamma) - ctx.fit().alpha_hat) / eps_tilde;
  }
  return omega;
}

VarianceEstimate combine_variance(double sigma, const Eigen::VectorXd& score, const Eigen::VectorXd& omega,
                                  const Eigen::MatrixXd& cox_influence_rows) {
  if (!(sigma > 0.0)) throw std::runtime_error("variance: sigma_hat must be positive");
  if (cox_influence_rows.rows() != score.size() || cox_influence_rows.cols() != omega.size())
    throw std::invalid_argument("variance: dimension mismatch");
  VarianceEstimate out;
  out.sigma_hat = sigma;
  out.omega_hat = omega;
  out.per_obs_score = score;
  out.influence = score / sigma + cox_influence_rows * omega;
  const double n = static_cast<double>(score.size());
  out.variance = out.influence.squaredNorm() / n;
  out.se = std::sqrt(out.variance / n);
  return out;
}

VarianceEstimate variance(const Dataset& data, const ProfileContext& ctx, const CoxFit& gamma_fit, double eps,
                          double eps_tilde) {
  if (!(eps > 0.0)) throw std::invalid_argument("variance: eps must be positive");
  const double a = ctx.fit().alpha_hat;
  const FitResult plus = ctx.profile_psi(a + eps);
  const FitResult minus = ctx.profile_psi(a - eps);
  const double sigma =
      second_difference_information(minus.final_objective, ctx.fit().final_objective, plus.final_objective, eps);
  if (!(sigma > 0.0)) throw std::runtime_error("sigma_hat: profiled curvature is not positive");
  const Eigen::VectorXd score =
      (ctx.objective().per_observation(plus.params) - ctx.objective().per_observation(ctx.fit().params)) / eps;
  const Eigen::VectorXd omega = omega_hat(ctx, gamma_fit, eps_tilde);
  VarianceEstimate out = combine_variance(sigma, score, omega, cox_influence(gamma_fit, data));
  out.eps = eps;
  out.eps_tilde = eps_tilde;
  return out;
}

std::string fit_to_json(const FitResult& fit) {
  nlohmann::json j;
  j["alpha_hat"] = fit.alpha_hat;
  j["alpha_init"] = fit.alpha_init;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["converged"] = fit.converged;
  j["stop_reason"] = fit.stop_reason;
  j["final_objective"] = fit.final_objective;
  j["coef_l1_norms"] = {{"xi", fit.coef_l1_norms[0]}, {"eta1", fit.coef_l1_norms[1]}, {"eta2", fit.coef_l1_norms[2]}};
  j["params"] = nlohmann::json::parse(params_to_json(fit.params));
  return j.dump(2);
}

std::string variance_to_json(const VarianceEstimate& var) {
  nlohmann::json j;
  j["sigma_hat"] = var.sigma_hat;
  j["omega_hat"] = std::vector<double>(var.omega_hat.data(), var.omega_hat.data() + var.omega_hat.size());
  j["variance"] = var.variance;
  j["se"] = var.se;
  j["eps"] = var.eps;
  j["eps_tilde"] = var.eps_tilde;
  j["per_obs_score"] =
      std::vector<double>(var.per_obs_score.data(), var.per_obs_score.data() + var.per_obs_score.size());
  return j.dump(2);
}

}  // namespace dcsieve
