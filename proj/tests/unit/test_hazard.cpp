#include <doctest.h>

#include <cmath>

#include "frailty/hazard.hpp"
#include "frailty/rng.hpp"
#include "support/oracles.hpp"

using namespace frailty;

TEST_CASE("link") {
  CHECK(link(0.0) == 0.5);
  CHECK(link(800.0) < 1.0);
  CHECK(link(800.0) > 0.999);
  CHECK(link(-800.0) >= 0.0);
  CHECK(link(-2.197225) == doctest::Approx(0.1).epsilon(1e-6));
  // link(-e) and 1 - link(e) agree to within one ulp of 1
  for (double e : {0.1, 1.3, 7.0, 35.0, 690.0}) {
    CHECK(std::abs(link(-e) - (1.0 - link(e))) <= 0x1p-52);
  }
  CHECK(logit(0.1) == doctest::Approx(-2.1972245773362196).epsilon(1e-14));
}

TEST_CASE("obs_loglik values and derivatives") {
  const ObsLogLik a = obs_loglik(0.0, 1);
  CHECK(a.value == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(a.d1 == doctest::Approx(0.5));
  CHECK(a.d2 == doctest::Approx(-0.25));

  // -log(1 + e^10) = -10.000045398899218
  const ObsLogLik b = obs_loglik(10.0, 0);
  CHECK(std::isfinite(b.value));
  CHECK(b.value == doctest::Approx(-10.000045398899218).epsilon(1e-14));

  const double h = 1e-5;
  const double fp = obs_loglik(0.3 + h, 1).value, fm = obs_loglik(0.3 - h, 1).value;
  const double f0 = obs_loglik(0.3, 1).value;
  CHECK(obs_loglik(0.3, 1).d1 == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
  CHECK(obs_loglik(0.3, 1).d2 == doctest::Approx((fp - 2 * f0 + fm) / (h * h)).epsilon(1e-4));

  for (double e : {-30.0, -1.0, 0.0, 2.0, 40.0}) {
    CHECK(obs_loglik(e, 0).value <= 0.0);
    CHECK(obs_loglik(e, 1).value <= 0.0);
  }
}

TEST_CASE("curvature slope is the derivative of p(1-p)") {
  const double h = 1e-6;
  for (double e : {-2.0, 0.0, 0.4, 3.0}) {
    const double fd = (-obs_loglik(e + h, 0).d2 + obs_loglik(e - h, 0).d2) / (2 * h);
    CHECK(curvature_slope(e) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("independent negative log-likelihood") {
  Rng rng(5);
  Eigen::MatrixXd X(10, 3);
  std::vector<int> y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    X(i, 2) = rng.normal();
    y[i] = rng.bernoulli(0.4);
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  CHECK(independent_negloglik(zero, X, y).value == doctest::Approx(10 * std::log(2.0)));

  Eigen::MatrixXd one(1, 1);
  one(0, 0) = 1.0;
  Eigen::VectorXd b1(1);
  b1[0] = logit(0.9);
  const std::vector<int> y1{1};
  CHECK(independent_negloglik(b1, one, y1).value == doctest::Approx(-std::log(0.9)));

  Eigen::VectorXd beta(3);
  beta << 0.2, -0.5, 0.8;
  const NegLogLik r = independent_negloglik(beta, X, y);
  auto f = [&](const Eigen::VectorXd& b) {
    double s = 0.0;
    for (int i = 0; i < 10; ++i) s -= oracle::bernoulli_loglik(X.row(i).dot(b), y[i]);
    return s;
  };
  for (int j = 0; j < 3; ++j) {
    CHECK(r.gradient[j] == doctest::Approx(oracle::central_diff(f, beta, j, 1e-6)).epsilon(1e-6));
  }
  // descent along the negative gradient
  CHECK(independent_negloglik(beta - 1e-3 * r.gradient, X, y).value < r.value);

  CHECK_THROWS(independent_negloglik(Eigen::VectorXd::Zero(2), X, y));
}
