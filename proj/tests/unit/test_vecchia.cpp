#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "frailty/vecchia.hpp"
#include "support/oracles.hpp"

using namespace frailty;

namespace {

NeighborSets all_predecessors(int n) {
  NeighborSets nb(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) nb[static_cast<std::size_t>(i)].push_back(j);
  }
  return nb;
}

double normal_logpdf(double x, double mean, double var) {
  return -0.5 * (std::log(2 * std::numbers::pi * var) + (x - mean) * (x - mean) / var);
}

}  // namespace

TEST_CASE("orderings") {
  const std::vector<SpaceTimePoint> pts{{2, 0.1, 0.1}, {1, 0.5, 0.5}, {1, 0.9, 0.2}};
  const auto o = order_points(pts, OrderingStrategy::time_then_random, 4);
  CHECK(o.back() == 0);
  CHECK(o == order_points(pts, OrderingStrategy::time_then_random, 4));

  Rng rng(8);
  const auto same = oracle::random_points(rng, 100, 1);
  const auto a = order_points(same, OrderingStrategy::random, 21);
  const auto b = order_points(same, OrderingStrategy::time_then_random, 21);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> iota(100);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
}

TEST_CASE("neighbor selection") {
  Rng rng(2);
  const auto pts = oracle::random_points(rng, 12, 3);
  const auto order = order_points(pts, OrderingStrategy::time_then_random, 1);
  const CovarianceParams p{1.0, 0.3, 2.0};
  const auto nb = select_neighbors(pts, order, 20, NeighborMetric::correlation, p);
  CHECK(nb[0].empty());
  for (int i = 0; i < 12; ++i) CHECK(nb[static_cast<std::size_t>(i)].size() == static_cast<std::size_t>(i));

  const std::vector<SpaceTimePoint> line{{0, 0.0, 0}, {0, 1.0, 0}, {0, 2.5, 0}, {0, 3.0, 0}};
  const std::vector<int> lr{0, 1, 2, 3};
  const auto nb1 = select_neighbors(line, lr, 1, NeighborMetric::euclidean, {1.0, 1.0, std::nullopt});
  for (int i = 1; i < 4; ++i) CHECK(nb1[static_cast<std::size_t>(i)] == std::vector<int>{i - 1});

  // |N(i)| = min(m, i) and every neighbor precedes i
  const auto nb3 = select_neighbors(pts, order, 3, NeighborMetric::correlation, p);
  for (int i = 0; i < 12; ++i) {
    CHECK(nb3[static_cast<std::size_t>(i)].size() == static_cast<std::size_t>(std::min(3, i)));
    for (int j : nb3[static_cast<std::size_t>(i)]) CHECK(j < i);
  }
}

TEST_CASE("single point factor") {
  const std::vector<SpaceTimePoint> one{{0, 0.5, 0.5}};
  const CovarianceParams p{2.5, 1.0, std::nullopt};
  const auto s = build_factor(one, {0}, {{}}, p, false, 0.0);
  CHECK(s.coef[0].size() == 0);
  CHECK(s.cond_var[0] == doctest::Approx(2.5));

  const CovarianceParams unit{1.0, 1.0, std::nullopt};
  const auto u = build_factor(one, {0}, {{}}, unit, false, 0.0);
  Eigen::VectorXd b(1);
  b << 1.0;
  CHECK(latent_log_density(b, u) ==
        doctest::Approx(-0.5 * (std::log(2 * std::numbers::pi) + 1.0)).epsilon(1e-14));
}

TEST_CASE("full conditioning reproduces the dense density") {
  Rng rng(17);
  for (int n : {5, 50}) {
    const auto pts = oracle::random_points(rng, n, 4);
    const CovarianceParams p{1.3, 0.35, 1.7};
    const auto order = order_points(pts, OrderingStrategy::time_then_random, 9);
    const auto s = build_factor(pts, order, all_predecessors(n), p);
    const Eigen::MatrixXd S = oracle::dense_cov(pts, 1.3, 0.35, 1.7, true, 1.5);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b[i] = rng.normal();
    CHECK(std::abs(latent_log_density(b, s) - oracle::gaussian_logpdf(b, S)) < 1e-8);

    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    const double expect = -0.5 * (n * std::log(2 * std::numbers::pi) +
                                  s.cond_var.array().log().sum());
    CHECK(latent_log_density(zero, s) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(s.log_det_precision() == doctest::Approx(-s.cond_var.array().log().sum()));

    // precision is the inverse covariance
    const Eigen::MatrixXd Q = Eigen::MatrixXd(s.precision());
    CHECK((Q * S - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("three points with one neighbor compose 1-D conditionals") {
  const std::vector<SpaceTimePoint> pts{{0, 0.0, 0.0}, {0, 0.4, 0.0}, {0, 0.5, 0.3}};
  const CovarianceParams p{1.0, 0.5, std::nullopt};
  const std::vector<int> order{0, 1, 2};
  const auto nb = select_neighbors(pts, order, 1, NeighborMetric::euclidean, p);
  const auto s = build_factor(pts, order, nb, p, false, 0.0);
  const Eigen::MatrixXd S = oracle::dense_cov(pts, 1.0, 0.5, 0.0, false, 1.5, 0.0);
  Eigen::VectorXd b(3);
  b << 0.3, -0.7, 1.1;
  double expect = normal_logpdf(b[0], 0.0, S(0, 0));
  expect += normal_logpdf(b[1], S(1, 0) / S(0, 0) * b[0], S(1, 1) - S(1, 0) * S(1, 0) / S(0, 0));
  const int k = nb[2][0];
  expect += normal_logpdf(b[2], S(2, k) / S(k, k) * b[k], S(2, 2) - S(2, k) * S(2, k) / S(k, k));
  CHECK(latent_log_density(b, s) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("factor structure and permutation consistency") {
  Rng rng(4);
  const int n = 30;
  const auto pts = oracle::random_points(rng, n, 3);
  const CovarianceParams p{0.8, 0.25, 1.2};
  const auto order = order_points(pts, OrderingStrategy::time_then_random, 2);
  const auto nb = select_neighbors(pts, order, 5, NeighborMetric::correlation, p);
  const auto s = build_factor(pts, order, nb, p);
  const auto B = s.factor_matrix();
  for (int i = 0; i < n; ++i) {
    int nnz = 0;
    for (int j = 0; j < n; ++j) nnz += B.coeff(i, j) != 0.0;
    CHECK(nnz == static_cast<int>(nb[static_cast<std::size_t>(i)].size()) + 1);
    CHECK(s.cond_var[i] > 0.0);
  }

  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = rng.normal();
  const auto o1 = order_points(pts, OrderingStrategy::random, 1);
  const auto o2 = order_points(pts, OrderingStrategy::random, 2);
  const double l1 = latent_log_density(b, build_factor(pts, o1, all_predecessors(n), p));
  const double l2 = latent_log_density(b, build_factor(pts, o2, all_predecessors(n), p));
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-10));

  CHECK_THROWS(latent_log_density(Eigen::VectorXd::Zero(n - 1), s));
}

TEST_CASE("refresh schedule") {
  CHECK(refresh_schedule(1));
  CHECK(refresh_schedule(2));
  CHECK_FALSE(refresh_schedule(3));
  CHECK(refresh_schedule(64));
  CHECK_FALSE(refresh_schedule(96));
}
