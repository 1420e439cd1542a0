#include <cmath>
#include <random>

#include "doctest.h"
#include "dcsieve/sieve.hpp"
#include "oracles.hpp"

using namespace dcsieve;

namespace {

SieveLayout discrete_layout() {
  SieveLayout lay;
  lay.basis = SplineBasis(3, 5);
  lay.discrete_v = true;
  lay.categories = {0.0, 1.0};
  return lay;
}

SieveLayout continuous_layout() {
  SieveLayout lay;
  lay.basis = SplineBasis(3, 4);
  lay.discrete_v = false;
  return lay;
}

}  // namespace

TEST_CASE("support bounds follow the margin rule") {
  Dataset d;
  d.d = 1;
  d.observations = {{0.2, true, {0.0}, 0.0}, {0.4, false, {1.0}, 0.0}};
  const auto cov = CovariateSet::parse("x1", 1);
  Eigen::VectorXd g(1);
  g << 1.0;
  const SupportBounds b = estimate_support(d, cov, g);
  const auto iv = b.at(0.0);
  CHECK(iv.a == doctest::Approx(-1e-6).epsilon(1e-12));
  CHECK(iv.b == doctest::Approx(1.0 + 1e-6).epsilon(1e-12));
  CHECK(u_transform(iv.a, 0.0, b) == 0.0);
  CHECK(u_transform(iv.b, 0.0, b) == 1.0);
  CHECK(u_transform(0.5 * (iv.a + iv.b), 0.0, b) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(u_transform(1.1, 0.0, b), std::domain_error);
  g << 0.0;
  try {
    estimate_support(d, cov, g);
    FAIL("expected degenerate index");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()) == "degenerate index");
  }
  d.observations.push_back({0.5, true, {0.3}, 1.0});
  g << 1.0;
  CHECK_THROWS(estimate_support(d, cov, g));
}

TEST_CASE("empirical bounds contain every index of the simulated data") {
  const Dataset d = oracle::small_dataset(1.5, 200, 3);
  const auto cov = CovariateSet::parse("x1,x2,v", 2);
  const CoxFit fit = fit_cox(d, EventRole::Censoring, cov);
  for (VMode mode : {VMode::Discrete, VMode::Continuous}) {
    const SupportBounds b = estimate_support(d, cov, fit.coef, mode);
    for (const auto& o : d.observations) {
      const double idx = linear_index(o, cov, fit.coef, d.d);
      const auto iv = b.at(o.v);
      CHECK(idx >= iv.a);
      CHECK(idx <= iv.b);
      const double u = u_transform(o, cov, fit.coef, d.d, b);
      CHECK((u >= 0.0 && u <= 1.0));
    }
  }
}

TEST_CASE("treatment mode resolution") {
  const Dataset d = oracle::small_dataset(0.0, 50, 1);
  CHECK(resolve_v_mode(VMode::Auto, d) == VMode::Discrete);
  Dataset c = d;
  for (std::size_t i = 0; i < c.size(); ++i) c.observations[i].v = static_cast<double>(i) / c.size();
  CHECK(resolve_v_mode(VMode::Auto, c) == VMode::Continuous);
  CHECK(v_mode_from_string(to_string(VMode::Continuous)) == VMode::Continuous);
  const SieveLayout lay = make_layout(d, 3, 5);
  CHECK(lay.p() == 8);
  CHECK(lay.q() == 2);
  CHECK(lay.free_count() == 1 + 8 + 2 * 7 * 8 + 2 * 7);
}

TEST_CASE("pinned coefficients make eta vanish at u = 0") {
  std::mt19937_64 rng(5);
  for (const SieveLayout& lay : {discrete_layout(), continuous_layout()}) {
    SieveParams p = oracle::random_params(lay, rng, 1.0, 0.3);
    for (auto& blk : p.eta1) blk.row(0).setConstant(7.0);
    p.eta2.row(0).setConstant(7.0);
    p.pin();
    for (double y : {0.0, 0.3, 1.0})
      for (double v : {0.0, 1.0}) {
        CHECK(eta1_at(p, 0.0, y, v) == 0.0);
        CHECK(eta2_at(p, 0.0, v) == 0.0);
      }
  }
}

TEST_CASE("hazard and cumulative hazard") {
  SieveParams zero = SieveParams::zeros(discrete_layout());
  for (double y : {0.0, 0.1, 0.37, 0.5, 1.0}) {
    CHECK(lambda_at(zero, y) == doctest::Approx(1.0));
    CHECK(std::abs(cum_hazard(zero, y) - y) < 1e-8);
  }
  std::mt19937_64 rng(8);
  const SieveParams p = oracle::random_params(discrete_layout(), rng, 0.7, 0.5);
  const oracle::DenseLoglik dense(p);
  const double want = oracle::simpson([&](double s) { return dense.lambda(s); }, 0.0, 1.0, 10000);
  CHECK(std::abs(cum_hazard(p, 1.0) - want) < 1e-7);
  double prev = 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const double c = cum_hazard(p, k / 1000.0);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("densities are normalized in u") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (const SieveLayout& lay : {discrete_layout(), continuous_layout()}) {
    for (int rep = 0; rep < 5; ++rep) {
      const SieveParams p = oracle::random_params(lay, rng, 1.0, 0.0);
      const double y = unif(rng);
      const double v = lay.discrete_v ? (rep % 2 ? 1.0 : 0.0) : unif(rng);
      const double fi = oracle::simpson([&](double u) { return f_density(p, u, y, v); }, 0.0, 1.0, 10000);
      const double gi = oracle::simpson([&](double u) { return g_density(p, u, v); }, 0.0, 1.0, 10000);
      CHECK(std::abs(fi - 1.0) < 1e-8);
      CHECK(std::abs(gi - 1.0) < 1e-8);
      const double z = oracle::simpson([&](double u) { return std::exp(eta1_at(p, u, y, v)); }, 0.0, 1.0, 10000);
      CHECK(std::abs(eta1_normalizer(p, y, v) - z) < 1e-7 * z);
      CHECK(f_density(p, 0.3, y, v) > 0.0);
    }
  }
  const SieveParams zero = SieveParams::zeros(discrete_layout());
  CHECK(f_density(zero, 0.42, 0.5, 1.0) == doctest::Approx(1.0));
  CHECK(g_density(zero, 0.42, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("packing and JSON round trips") {
  std::mt19937_64 rng(3);
  const SieveParams p = oracle::random_params(discrete_layout(), rng, 1.0, -0.4);
  const Eigen::VectorXd x = p.pack();
  CHECK(x.size() == p.layout.free_count());
  CHECK(x[0] == -0.4);
  SieveParams q = SieveParams::zeros(p.layout);
  q.unpack(x);
  CHECK(q.pack() == x);
  CHECK(q.eta1[1] == p.eta1[1]);
  const SieveParams r = params_from_json(params_to_json(p));
  CHECK(r.pack() == x);
  CHECK(r.layout == p.layout);
  const auto norms = p.l1_norms();
  CHECK(norms[0] == doctest::Approx(p.xi.cwiseAbs().sum()));
  CHECK(p.spline_sum_squares() > 0.0);
}

TEST_CASE("asymptotic sieve schedule") {
  const SieveSchedule s = asymptotic_schedule(200);
  CHECK(s.m == 13);
  CHECK(s.kn >= 1);
  CHECK(s.bound == doctest::Approx(std::sqrt(std::log(200.0))));
  CHECK_THROWS(asymptotic_schedule(200, 10));
  CHECK_THROWS(asymptotic_schedule(200, 11, 1.0, 0.5));
}
