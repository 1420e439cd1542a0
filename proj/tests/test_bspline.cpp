#include <random>

#include "doctest.h"
#include "dcsieve/bspline.hpp"
#include "oracles.hpp"

using dcsieve::SplineBasis;

TEST_CASE("basis matches the Cox-de Boor recursion") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int m : {2, 3, 4}) {
    for (int kn : {1, 5, 8}) {
      const SplineBasis basis(m, kn);
      const auto knots = oracle::clamped_knots(m, kn);
      REQUIRE(basis.knots() == knots);
      for (int k = 0; k < 100; ++k) {
        const double s = unif(rng);
        const Eigen::VectorXd got = basis.eval(s);
        const Eigen::VectorXd want = oracle::basis_row(knots, m, s);
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
      }
      for (double s : {0.0, 1.0, 0.2, 0.4, 0.6})
        CHECK((basis.eval(s) - oracle::basis_row(knots, m, s)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("partition of unity, local support and end values") {
  const SplineBasis basis(3, 5);
  CHECK(basis.dimension() == 8);
  for (double s = 0.0; s <= 1.0; s += 0.01) {
    const Eigen::VectorXd n = basis.eval(s);
    CHECK(n.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((n.array() >= 0.0).all());
    CHECK((n.array() > 0.0).count() <= basis.m() + 1);
  }
  const Eigen::VectorXd at0 = basis.eval(0.0);
  CHECK(at0[0] == 1.0);
  CHECK(at0.tail(7).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd at1 = basis.eval(1.0);
  CHECK(at1[7] == doctest::Approx(1.0));
}

TEST_CASE("derivative agrees with central differences") {
  const SplineBasis basis(3, 5);
  for (double s : {0.05, 0.13, 0.37, 0.5, 0.71, 0.93}) {
    const double h = 1e-6;
    const Eigen::VectorXd fd = (basis.eval(s + h) - basis.eval(s - h)) / (2 * h);
    CHECK((basis.eval_deriv(s) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("Greville coefficients reproduce the identity") {
  const SplineBasis basis(3, 4);
  const Eigen::VectorXd g = basis.greville();
  for (double s = 0.0; s <= 1.0; s += 0.05) CHECK(basis.eval(s).dot(g) == doctest::Approx(s).epsilon(1e-13));
}

TEST_CASE("domain and argument checks") {
  const SplineBasis basis(3, 5);
  CHECK_THROWS_AS(basis.eval(1.1), std::domain_error);
  CHECK_THROWS_AS(basis.eval(-0.01), std::domain_error);
  CHECK_NOTHROW(basis.eval(1.0 + 1e-14));
  CHECK_THROWS(SplineBasis(1, 5));
  CHECK_THROWS(SplineBasis(3, 0));
  CHECK(basis.interval_of(1.0) == 4);
  CHECK(basis.interval_of(0.0) == 0);
}
