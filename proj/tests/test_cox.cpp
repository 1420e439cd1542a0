#include <cmath>

#include "doctest.h"
#include "dcsieve/cox.hpp"
#include "oracles.hpp"

using namespace dcsieve;

namespace {

// Hand-built n=8 dataset with one covariate stored as x1.
Dataset eight() {
  Dataset d;
  d.d = 1;
  const double y[] = {0.12, 0.25, 0.31, 0.44, 0.52, 0.67, 0.81, 0.95};
  const bool r[] = {true, false, true, true, false, true, false, true};
  const double x[] = {0.8, -0.3, 1.1, 0.2, -0.9, 0.4, -0.5, -1.2};
  for (int i = 0; i < 8; ++i) d.observations.push_back({y[i], r[i], {x[i]}, i % 2 ? 1.0 : 0.0});
  return d;
}

}  // namespace

TEST_CASE("Cox fit matches grid search of the partial likelihood product") {
  const Dataset d = eight();
  const CoxFit fit = fit_cox(d, EventRole::Failure, CovariateSet::parse("x1", 1));
  REQUIRE(fit.converged);
  std::vector<double> y, w;
  std::vector<int> e;
  for (const auto& o : d.observations) y.push_back(o.y), w.push_back(o.x[0]), e.push_back(o.r);
  const double best = oracle::grid_argmax([&](double b) { return oracle::partial_loglik(y, e, w, b); }, -5, 5, 1e-4);
  CHECK(std::abs(fit.coef[0] - best) < 1e-3);
  CHECK(fit.loglik == doctest::Approx(oracle::partial_loglik(y, e, w, fit.coef[0])).epsilon(1e-12));
  CHECK(cox_loglik(d, EventRole::Failure, fit.covariates, fit.coef) == doctest::Approx(fit.loglik));
}

TEST_CASE("censoring role uses 1 - R and drops records censored at tau") {
  Dataset d = eight();
  d.observations[7].r = false;
  d.observations[7].y = d.tau;
  CHECK(is_event(d, 1, EventRole::Censoring));
  CHECK_FALSE(is_event(d, 7, EventRole::Censoring));
  CHECK_FALSE(is_event(d, 0, EventRole::Censoring));
  std::vector<double> y, w;
  std::vector<int> e;
  for (std::size_t i = 0; i < d.size(); ++i)
    y.push_back(d.observations[i].y), w.push_back(d.observations[i].x[0]),
        e.push_back(is_event(d, i, EventRole::Censoring));
  const CoxFit fit = fit_cox(d, EventRole::Censoring, CovariateSet::parse("x1", 1));
  const double best = oracle::grid_argmax([&](double b) { return oracle::partial_loglik(y, e, w, b); }, -8, 8, 1e-4);
  CHECK(std::abs(fit.coef[0] - best) < 1e-3);
}

TEST_CASE("constant covariate gets coefficient zero") {
  Dataset d = oracle::small_dataset(0.0, 100, 4);
  for (auto& o : d.observations) o.x[1] = 0.5;
  const CoxFit fit = fit_cox(d, EventRole::Failure, CovariateSet::parse("x2,v", 2));
  CHECK(fit.constant[0]);
  CHECK(fit.coef[0] == 0.0);
  CHECK(std::isfinite(fit.coef[1]));
}

TEST_CASE("shift and scale invariance") {
  const Dataset d = oracle::small_dataset(1.5, 200, 8);
  const auto cov = CovariateSet::parse("x1,x2,v", 2);
  const CoxFit base = fit_cox(d, EventRole::Censoring, cov);
  Dataset shifted = d, scaled = d;
  for (auto& o : shifted.observations) o.x[0] += 3.0;
  for (auto& o : scaled.observations) o.x[1] *= 2.5;
  const CoxFit fs = fit_cox(shifted, EventRole::Censoring, cov);
  const CoxFit fc = fit_cox(scaled, EventRole::Censoring, cov);
  CHECK((fs.coef - base.coef).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(std::abs(fc.coef[1] * 2.5 - base.coef[1]) < 1e-10);
  CHECK(std::abs(fc.coef[0] - base.coef[0]) < 1e-10);
}

TEST_CASE("information is symmetric positive definite and Newton never decreases") {
  const Dataset d = oracle::small_dataset(1.5, 200, 21);
  const CoxFit fit = fit_cox(d, EventRole::Censoring, CovariateSet::parse("x1,x2,v", 2));
  CHECK((fit.info - fit.info.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.info);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  CHECK(fit.loglik >= cox_loglik(d, EventRole::Censoring, fit.covariates, zero));
}

TEST_CASE("influence rows sum to zero and track deletion refits") {
  const Dataset d = oracle::small_dataset(1.5, 200, 2);
  const auto cov = CovariateSet::parse("x1,x2,v", 2);
  const CoxFit fit = fit_cox(d, EventRole::Censoring, cov);
  const Eigen::MatrixXd s = cox_influence(fit, d);
  REQUIRE(s.rows() == 200);
  CHECK(s.colwise().sum().cwiseAbs().maxCoeff() < 1e-8);
  const double n = 200.0;
  for (int i : {0, 17, 55, 123, 199}) {
    Dataset del = d;
    del.observations.erase(del.observations.begin() + i);
    const CoxFit f2 = fit_cox(del, EventRole::Censoring, cov);
    const Eigen::VectorXd shift = f2.coef - fit.coef;
    const Eigen::VectorXd predicted = -s.row(i).transpose() / n;
    CHECK((shift - predicted).norm() < 0.2 * predicted.norm() + 2e-3);
  }
}

TEST_CASE("influence variance agrees with the jackknife") {
  const Dataset d = oracle::small_dataset(1.5, 200, 1);
  const auto cov = CovariateSet::parse("x1", 2);
  const CoxFit fit = fit_cox(d, EventRole::Censoring, cov);
  const Eigen::MatrixXd s = cox_influence(fit, d);
  const double n = 200.0;
  const double sandwich = s.col(0).squaredNorm() / (n * n);
  std::vector<double> loo;
  for (std::size_t i = 0; i < d.size(); ++i) {
    Dataset del = d;
    del.observations.erase(del.observations.begin() + static_cast<long>(i));
    loo.push_back(fit_cox(del, EventRole::Censoring, cov).coef[0]);
  }
  const double jack = oracle::jackknife_variance(loo);
  CHECK(std::abs(sandwich - jack) / jack < 0.15);
}

TEST_CASE("naive estimate and error paths") {
  const Dataset d = oracle::small_dataset(0.0, 4000, 17);
  CHECK(std::abs(naive_alpha(d) - 1.0) < 0.12);
  Dataset none = eight();
  for (auto& o : none.observations) o.r = false;
  CHECK_THROWS_AS(fit_cox(none, EventRole::Failure, CovariateSet::parse("x1", 1)), std::runtime_error);
  Dataset same_v = eight();
  for (auto& o : same_v.observations) o.v = 1.0;
  CHECK(naive_alpha(same_v) == 0.0);
}
