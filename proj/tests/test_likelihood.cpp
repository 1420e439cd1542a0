#include <cmath>
#include <random>

#include "doctest.h"
#include "dcsieve/likelihood.hpp"
#include "oracles.hpp"

using namespace dcsieve;

namespace {

SieveLayout layout2() {
  SieveLayout lay;
  lay.basis = SplineBasis(3, 5);
  lay.discrete_v = true;
  lay.categories = {0.0, 1.0};
  return lay;
}

ReducedSample sample_from(const Dataset& d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ReducedSample s;
  s.tau = d.tau;
  for (const auto& o : d.observations) {
    s.y.push_back(o.y);
    s.r.push_back(o.r);
    s.u.push_back(unif(rng));
    s.v.push_back(o.v);
  }
  return s;
}

}  // namespace

TEST_CASE("closed forms at zero coefficients") {
  SieveParams p = SieveParams::zeros(layout2(), 0.7);
  Observation ev{0.4, true, {}, 1.0};
  CHECK(loglik_obs(p, ev, 0.3) == doctest::Approx(0.7 - std::exp(0.7) * 0.4).epsilon(1e-10));
  Observation at_tau{1.0, false, {}, 1.0};
  CHECK(loglik_obs(p, at_tau, 0.6) == doctest::Approx(-std::exp(0.7)).epsilon(1e-10));
  Observation cens{0.3, false, {}, 0.0};
  CHECK(loglik_obs(p, cens, 0.6) == doctest::Approx(-0.3).epsilon(1e-10));
}

TEST_CASE("censored term matches a dense quadrature oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 3; ++rep) {
    const SieveParams p = oracle::random_params(layout2(), rng, 0.5, 0.8);
    const oracle::DenseLoglik dense(p, 1000);
    const double y = 0.1 + 0.8 * unif(rng), u = unif(rng), v = rep % 2;
    const double want = dense.censored(y, u, v, 20000);
    const double got = loglik_obs(p, Observation{y, false, {}, v}, u);
    CHECK(std::abs(got - want) < 1e-6 * std::abs(want));
    const double want_ev = dense.event(y, u, v, 20000);
    const double got_ev = loglik_obs(p, Observation{y, true, {}, v}, u);
    CHECK(std::abs(got_ev - want_ev) < 1e-6 * std::abs(want_ev));
  }
}

TEST_CASE("objective pieces") {
  const Dataset d = oracle::small_dataset(0.0, 40, 4);
  const ReducedSample s = sample_from(d, 1);
  ObjectiveOptions opt;
  opt.penalty_weight = 1e-3;
  const Objective obj(s, layout2(), opt);
  std::mt19937_64 rng(2);
  const SieveParams p = oracle::random_params(layout2(), rng, 0.4, 0.9);

  SUBCASE("penalty is quadratic and excludes alpha") {
    SieveParams twice = p;
    twice.xi *= 2.0;
    for (auto& b : twice.eta1) b *= 2.0;
    twice.eta2 *= 2.0;
    twice.alpha = 5.0;
    CHECK(obj.penalty(twice) == doctest::Approx(4.0 * obj.penalty(p)));
    CHECK(obj.penalty(p) == doctest::Approx(1e-3 * p.spline_sum_squares()));
  }
  SUBCASE("value is the mean log-likelihood minus the penalty") {
    CHECK(obj.value(p) == doctest::Approx(obj.per_observation(p).mean() - obj.penalty(p)).epsilon(1e-12));
    for (std::size_t i : {0u, 7u, 39u}) {
      Observation o{s.y[i], static_cast<bool>(s.r[i]), {}, s.v[i]};
      CHECK(obj.per_observation(p)[static_cast<Eigen::Index>(i)] ==
            doctest::Approx(loglik_obs(p, o, s.u[i])).epsilon(1e-10));
    }
  }
  SUBCASE("large coefficients are penalized") {
    SieveParams big = p;
    big.xi[3] = 10.0;
    CHECK(obj.value(big) < obj.value(p));
  }
  SUBCASE("permutation invariance") {
    ReducedSample r = s;
    std::reverse(r.y.begin(), r.y.end());
    std::reverse(r.r.begin(), r.r.end());
    std::reverse(r.u.begin(), r.u.end());
    std::reverse(r.v.begin(), r.v.end());
    const Objective rev(r, layout2(), opt);
    CHECK(rev.value(p) == doctest::Approx(obj.value(p)).epsilon(1e-12));
  }
}

TEST_CASE("gradient agrees with central differences") {
  const Dataset d = oracle::small_dataset(1.5, 30, 9);
  const ReducedSample s = sample_from(d, 3);
  const Objective obj(s, layout2());
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 3; ++rep) {
    SieveParams p = oracle::random_params(layout2(), rng, 0.5, 0.5 + 0.3 * rep);
    Eigen::VectorXd g;
    obj.value_and_gradient(p, &g);
    const Eigen::VectorXd x = p.pack();
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      SieveParams a = p, b = p;
      Eigen::VectorXd xa = x, xb = x;
      xa[k] += h;
      xb[k] -= h;
      a.unpack(xa);
      b.unpack(xb);
      const double fd = (obj.value(a) - obj.value(b)) / (2 * h);
      CHECK(std::abs(g[k] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
  }
}

TEST_CASE("penalty gradient and pinned entries") {
  ReducedSample s;
  s.y = {0.5};
  s.r = {1};
  s.u = {0.5};
  s.v = {0.0};
  ObjectiveOptions with, without;
  with.penalty_weight = 0.01;
  without.penalty_weight = 0.0;
  std::mt19937_64 rng(4);
  const SieveParams p = oracle::random_params(layout2(), rng, 0.5, 0.2);
  const SieveParams g1 = Objective(s, layout2(), with).gradient(p);
  const SieveParams g0 = Objective(s, layout2(), without).gradient(p);
  CHECK((g0.xi - g1.xi - 0.02 * p.xi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g1.alpha == doctest::Approx(g0.alpha));
  CHECK(g1.eta1[0].row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g1.eta2.row(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mirrored records give mirrored eta1 gradients") {
  ObjectiveOptions opt;
  opt.penalty_weight = 0.0;
  const SieveParams zero = SieveParams::zeros(layout2(), 0.0);
  auto grad_at = [&](double u) {
    ReducedSample s;
    s.y = {0.4};
    s.r = {1};
    s.u = {u};
    s.v = {0.0};
    return Objective(s, layout2(), opt).gradient(zero).eta1[0];
  };
  const Eigen::MatrixXd a = grad_at(0.3), b = grad_at(0.7);
  const int p = static_cast<int>(a.rows());
  for (int i = 1; i < p - 1; ++i) CHECK((a.row(i) - b.row(p - 1 - i)).cwiseAbs().maxCoeff() < 1e-10);
  // With both records the gradient becomes symmetric in the u index.
  CHECK((a.row(2) + b.row(2) - a.row(p - 3) - b.row(p - 3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reduce maps records into the unit interval") {
  const Dataset d = oracle::small_dataset(1.5, 100, 6);
  const auto cov = CovariateSet::parse("x1,x2,v", 2);
  const CoxFit fit = fit_cox(d, EventRole::Censoring, cov);
  const SupportBounds b = estimate_support(d, cov, fit.coef);
  const ReducedSample s = reduce(d, cov, fit.coef, b);
  REQUIRE(s.size() == d.size());
  for (double u : s.u) CHECK((u >= 0.0 && u <= 1.0));
  CHECK(*std::min_element(s.u.begin(), s.u.end()) == doctest::Approx(0.0).epsilon(1e-5));
}
