#include <doctest.h>

#include <cmath>
#include <limits>

#include "frailty/covariance.hpp"
#include "frailty/error.hpp"
#include "support/oracles.hpp"

using namespace frailty;

TEST_CASE("matern closed forms") {
  CovarianceParams p{2.0, 1.0, std::nullopt, Smoothness::three_halves};
  CHECK(matern(0.0, p) == doctest::Approx(2.0).epsilon(1e-15));

  p = {1.0, 1.0, std::nullopt, Smoothness::half};
  CHECK(matern(1.0, p) == doctest::Approx(0.36787944117144233).epsilon(1e-14));

  p.nu = Smoothness::three_halves;
  // (1 + sqrt 3) exp(-sqrt 3), reference value from a 30-digit evaluation
  CHECK(matern(1.0, p) == doctest::Approx(0.48335772459650765).epsilon(1e-14));

  p.nu = Smoothness::five_halves;
  CHECK(matern(0.7, p) == doctest::Approx(oracle::matern_closed_form(0.7, 2.5)).epsilon(1e-14));

  CHECK_THROWS_AS(matern(-0.1, p), ValidationError);
}

TEST_CASE("matern is nonincreasing in distance") {
  for (Smoothness nu : {Smoothness::half, Smoothness::three_halves, Smoothness::five_halves}) {
    CovarianceParams p{1.3, 1.0, std::nullopt, nu};
    double prev = matern(0.0, p);
    for (int k = 1; k <= 1000; ++k) {
      const double v = matern(0.01 * k, p);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("scaled distance") {
  CovarianceParams sp{1.0, 2.0, std::nullopt};
  const SpaceTimePoint a{0, 0.3, 0.4}, b{5, 0.3, 0.4};
  CHECK(scaled_distance(a, b, sp, CovarianceMode::spatial) == 0.0);

  CovarianceParams st{1.0, 4.0, 3.0};
  CHECK(scaled_distance({0, 0, 0}, {3, 0, 0}, st, CovarianceMode::spacetime) ==
        doctest::Approx(1.0));
  CHECK(scaled_distance({0, 0, 0}, {3, 4, 0}, st, CovarianceMode::spacetime) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(scaled_distance({1, 2, 3}, {0, 1, 1}, st, CovarianceMode::spacetime) ==
        scaled_distance({0, 1, 1}, {1, 2, 3}, st, CovarianceMode::spacetime));

  CHECK_THROWS(scaled_distance(a, b, sp, CovarianceMode::spacetime));
}

TEST_CASE("cov_matrix") {
  const CovarianceParams p{1.7, 0.5, std::nullopt};
  const std::vector<SpaceTimePoint> one{{0, 0.2, 0.2}};
  const Eigen::MatrixXd S1 = cov_matrix(one, p, 0.0);
  CHECK(S1(0, 0) == doctest::Approx(1.7));

  const std::vector<SpaceTimePoint> twins{{0, 0.2, 0.2}, {0, 0.2, 0.2}};
  const Eigen::MatrixXd S2 = cov_matrix(twins, p, 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(S2);
  const bool singular = llt.info() != Eigen::Success || std::abs(S2.determinant()) < 1e-12;
  CHECK(singular);

  const std::vector<SpaceTimePoint> line{{0, 0.0, 0.0}, {0, 0.3, 0.0}, {0, 0.9, 0.0}};
  const Eigen::MatrixXd S3 = cov_matrix(line, p, 0.0);
  const Eigen::MatrixXd O3 = oracle::dense_cov(line, 1.7, 0.5, 0.0, false, 1.5, 0.0);
  CHECK((S3 - O3).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cov_matrix is positive semidefinite") {
  Rng rng(11);
  const CovarianceParams p{2.0, 0.3, 1.5};
  for (int rep = 0; rep < 5; ++rep) {
    const auto pts = oracle::random_points(rng, 50, 4);
    const Eigen::MatrixXd S = cov_matrix(pts, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8 * 2.0);
  }
}

TEST_CASE("spatial mode is the spacetime limit with infinite temporal range") {
  Rng rng(3);
  const auto pts = oracle::random_points(rng, 10, 1);
  const CovarianceParams sp{1.0, 0.4, std::nullopt};
  const CovarianceParams st{1.0, 0.4, 1e12};
  const Eigen::MatrixXd a = cov_matrix(pts, sp), b = cov_matrix(pts, st);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("log scale round trip") {
  const CovarianceParams unit{1.0, 1.0, std::nullopt};
  const Eigen::VectorXd v = to_log_scale(unit);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.0);

  const CovarianceParams p{0.46, 2.0, 2.94};
  const CovarianceParams q = from_log_scale(to_log_scale(p));
  CHECK(q.sigma2 == doctest::Approx(0.46).epsilon(1e-12));
  CHECK(q.rho_s == doctest::Approx(2.0).epsilon(1e-12));
  REQUIRE(q.rho_t);
  CHECK(*q.rho_t == doctest::Approx(2.94).epsilon(1e-12));

  Eigen::VectorXd bad(2);
  bad << -std::numeric_limits<double>::infinity(), 0.0;
  CHECK_THROWS(from_log_scale(bad));
}

TEST_CASE("covariance gradient matches finite differences") {
  const CovarianceParams p{1.4, 0.6, 2.2};
  const SpaceTimePoint a{0, 0.1, 0.2}, b{1, 0.5, 0.0};
  double g[3];
  covariance_gradient(a, b, p, false, kDefaultJitter, g);
  const Eigen::VectorXd x0 = to_log_scale(p);
  auto f = [&](const Eigen::VectorXd& x) { return covariance(a, b, from_log_scale(x), false); };
  for (int i = 0; i < 3; ++i) {
    CHECK(g[i] == doctest::Approx(oracle::central_diff(f, x0, i, 1e-6)).epsilon(1e-7));
  }
}
