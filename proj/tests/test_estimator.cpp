#include <cmath>

#include "doctest.h"
#include "dcsieve/estimator.hpp"
#include "oracles.hpp"

using namespace dcsieve;

namespace {

struct Fitted {
  Dataset data;
  CoxFit gamma;
  EstimatorConfig config;
  FitResult fit;
};

Fitted fitted(double beta0, int n, std::uint64_t seed) {
  Fitted f;
  f.data = oracle::small_dataset(beta0, n, seed);
  f.gamma = fit_cox(f.data, EventRole::Censoring, CovariateSet::parse("x1,x2,v", 2));
  f.fit = maximize(f.data, f.gamma, f.config);
  return f;
}

}  // namespace

TEST_CASE("full fit is finite, bounded, deterministic and stationary") {
  const Fitted a = fitted(0.0, 120, 31);
  CHECK(std::isfinite(a.fit.alpha_hat));
  CHECK(std::abs(a.fit.alpha_hat) <= a.config.bigM);
  CHECK(a.fit.converged);
  CHECK(a.fit.alpha_init == 1.0);
  CHECK(a.fit.trace.back() >= a.fit.trace.front());
  const Fitted b = fitted(0.0, 120, 31);
  CHECK(fit_to_json(a.fit) == fit_to_json(b.fit));

  const Objective obj = build_objective(a.data, a.gamma.covariates, a.gamma.coef, a.config);
  Eigen::VectorXd g;
  obj.value_and_gradient(a.fit.params, &g);
  CHECK(g.lpNorm<Eigen::Infinity>() < 1e-3);
  CHECK(obj.value(a.fit.params) == doctest::Approx(a.fit.final_objective).epsilon(1e-12));
}

TEST_CASE("profiled objective peaks at the full fit") {
  const Fitted a = fitted(0.0, 120, 32);
  const ProfileContext ctx(a.data, a.gamma, a.fit, a.config);
  const double eps = ctx.default_eps();
  CHECK(eps == doctest::Approx(1.0 / std::sqrt(120.0)));
  CHECK(ctx.default_eps_tilde() == doctest::Approx(std::cbrt(1.0 / 120.0)));
  const double center = ctx.pl(a.fit.alpha_hat);
  CHECK(center == doctest::Approx(a.fit.final_objective).epsilon(1e-8));
  CHECK(ctx.pl(a.fit.alpha_hat + eps) < center);
  CHECK(ctx.pl(a.fit.alpha_hat - eps) < center);
  CHECK(ctx.profile_alpha(a.gamma.coef) == doctest::Approx(a.fit.alpha_hat).epsilon(1e-4));
  CHECK(sigma_hat(ctx, eps) > 0.0);
}

TEST_CASE("second difference and combination arithmetic") {
  // pl(a) = -2 a^2 has curvature 4.
  CHECK(second_difference_information(-2 * 0.01, 0.0, -2 * 0.01, 0.1) == doctest::Approx(4.0));
  CHECK_THROWS(second_difference_information(0, 0, 0, 0.0));
  Eigen::VectorXd score(4);
  score << 1.0, -1.0, 2.0, -2.0;
  Eigen::VectorXd omega(1);
  omega << 0.5;
  Eigen::MatrixXd s(4, 1);
  s << 2.0, 0.0, -2.0, 0.0;
  const VarianceEstimate v = combine_variance(2.0, score, omega, s);
  // influence = (1.5, -0.5, 0, -1)
  CHECK(v.influence[0] == doctest::Approx(1.5));
  CHECK(v.variance == doctest::Approx((2.25 + 0.25 + 0.0 + 1.0) / 4));
  CHECK(v.se == doctest::Approx(std::sqrt(v.variance / 4)));
  CHECK_THROWS(combine_variance(-1.0, score, omega, s));
  CHECK_THROWS(combine_variance(1.0, score, omega, Eigen::MatrixXd(3, 1)));
}

TEST_CASE("direction without effect on U has zero omega") {
  const Fitted a = fitted(1.5, 120, 33);
  const ProfileContext ctx(a.data, a.gamma, a.fit, a.config);
  const Eigen::VectorXd omega = omega_hat(ctx, a.gamma, ctx.default_eps_tilde());
  REQUIRE(omega.size() == 3);
  // gamma_v shifts the index by a constant within each treatment arm.
  CHECK(std::abs(omega[2]) < 1e-4);
  CHECK(omega.allFinite());
}

TEST_CASE("variance report") {
  const Fitted a = fitted(0.0, 120, 34);
  const ProfileContext ctx(a.data, a.gamma, a.fit, a.config);
  const VarianceEstimate v = variance(a.data, ctx, a.gamma, ctx.default_eps(), ctx.default_eps_tilde());
  CHECK(v.se > 0.0);
  CHECK(v.se < 1.0);
  CHECK(v.per_obs_score.size() == 120);
  CHECK(v.influence.size() == 120);
  CHECK(v.sigma_hat == doctest::Approx(sigma_hat(ctx, ctx.default_eps())).epsilon(1e-10));
  CHECK((v.per_obs_score - score_contrib(ctx, ctx.default_eps())).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_FALSE(variance_to_json(v).empty());
}

TEST_CASE("fixed alpha stays fixed") {
  const Fitted a = fitted(0.0, 120, 35);
  const Objective obj = build_objective(a.data, a.gamma.covariates, a.gamma.coef, a.config);
  const FitResult r = maximize_objective(obj, a.config, &a.fit.params, 0.25);
  CHECK(r.alpha_hat == 0.25);
  CHECK(r.final_objective <= a.fit.final_objective + 1e-12);
  CHECK_THROWS(maximize_objective(obj, a.config, nullptr, 20.0));
}
