#include <doctest.h>

#include <cmath>

#include "frailty/error.hpp"
#include "frailty/rng.hpp"
#include "frailty/scoring.hpp"
#include "support/oracles.hpp"

using namespace frailty;

TEST_CASE("auc") {
  const std::vector<double> p{0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y{0, 0, 1, 1};
  CHECK(auc(p, y) == doctest::Approx(0.75));
  const std::vector<double> perfect{0.1, 0.2, 0.7, 0.9};
  CHECK(auc(perfect, y) == 1.0);
  const std::vector<double> flat(4, 0.3);
  CHECK(auc(flat, y) == 0.5);
  const std::vector<int> one(4, 1);
  CHECK_THROWS_AS(auc(p, one), ValidationError);

  // invariant under strictly monotone maps, brute force over all pairs
  Rng rng(1);
  std::vector<double> s(60), t(60);
  std::vector<int> l(60);
  for (int i = 0; i < 60; ++i) {
    s[i] = std::round(rng.uniform() * 20) / 20;
    t[i] = std::exp(3 * s[i]) - 7;
    l[i] = rng.bernoulli(0.4);
  }
  double num = 0, den = 0;
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 60; ++j) {
      if (l[i] == 1 && l[j] == 0) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
    }
  }
  CHECK(auc(s, l) == doctest::Approx(num / den).epsilon(1e-14));
  CHECK(auc(t, l) == auc(s, l));
}

TEST_CASE("h-measure") {
  const std::vector<int> y{0, 0, 1, 1, 0, 1};
  const std::vector<double> perfect{0.1, 0.2, 0.8, 0.9, 0.3, 0.7};
  CHECK(h_measure(perfect, y) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> flat(6, 0.4);
  CHECK(std::abs(h_measure(flat, y)) < 1e-12);
  CHECK_THROWS(h_measure(flat, std::vector<int>(6, 0)));

  Rng rng(20);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> s(20);
    std::vector<int> l(20);
    for (int i = 0; i < 20; ++i) {
      l[i] = i % 3 == 0;
      s[i] = std::round((rng.uniform() + 0.5 * l[i]) * 10) / 10;
    }
    CHECK(std::abs(h_measure(s, l) - oracle::h_measure_grid(s, l)) < 1e-4);
  }
}

TEST_CASE("log-loss and brier") {
  const std::vector<double> half(4, 0.5);
  const std::vector<int> y{0, 1, 1, 0};
  CHECK(log_loss(half, y) == doctest::Approx(std::log(2.0)));
  CHECK(brier(half, y) == doctest::Approx(0.25));

  const std::vector<double> exact{0.0, 1.0, 1.0, 0.0};
  CHECK(log_loss(exact, y) < 1e-14);
  CHECK(brier(exact, y) == 0.0);

  const std::vector<double> p{0.9, 0.2, 0.6};
  const std::vector<int> l{1, 0, 1};
  CHECK(log_loss(p, l) == doctest::Approx(-(std::log(0.9) + std::log(0.8) + std::log(0.6)) / 3));
  CHECK(brier(p, l) == doctest::Approx(0.07));
}

TEST_CASE("ece") {
  const std::vector<int> y{0, 1, 0, 1, 0, 1, 0, 1};
  const std::vector<double> rate(8, 0.5);
  const BinSpec bins = quantile_bins(rate, 20);
  CHECK(ece(rate, y, bins) == doctest::Approx(0.0));
  const std::vector<double> ones(8, 1.0);
  CHECK(ece(ones, y, quantile_bins(ones, 20)) == doctest::Approx(0.5));

  const BinSpec two{{0.0, 0.5, 1.0}};
  const std::vector<double> p{0.2, 0.3, 0.7, 0.9};
  const std::vector<int> l{0, 1, 1, 1};
  CHECK(ece(p, l, two) == doctest::Approx(0.5 * 0.25 + 0.5 * 0.2));

  // calibrated within every bin
  const std::vector<double> q{0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75};
  const std::vector<int> ql{1, 0, 0, 0, 1, 1, 1, 0};
  CHECK(ece(q, ql, two) == doctest::Approx(0.0));

  Rng rng(4);
  std::vector<double> pooled(1000);
  for (auto& v : pooled) v = rng.uniform();
  const BinSpec b = quantile_bins(pooled, 20);
  CHECK(b.count() == 20);
  CHECK(b.edges.front() == 0.0);
  CHECK(b.edges.back() == 1.0);
  for (std::size_t k = 1; k < b.edges.size(); ++k) CHECK(b.edges[k] >= b.edges[k - 1]);
}

TEST_CASE("crps") {
  CHECK(crps_empirical(std::vector<double>(5, 3.0), 3.0) == 0.0);
  CHECK(crps_empirical(std::vector<double>{0.0, 1.0}, 1.0) == doctest::Approx(0.25));
  CHECK(crps_empirical(std::vector<double>{2.5}, -1.0) == doctest::Approx(3.5));

  // samples from mass (0.25, 0.5, 0.25) on {0, 1, 2}; exact CRPS at L = 1 is
  // int_0^1 0.25^2 dy + int_1^2 0.25^2 dy = 0.125
  Rng rng(8);
  const int n = 20000;
  std::vector<double> x(n);
  for (auto& v : x) {
    const double u = rng.uniform();
    v = u < 0.25 ? 0.0 : (u < 0.75 ? 1.0 : 2.0);
  }
  // influence function h(x) = |x - L| - E|x - X'| gives the standard error
  auto e_abs = [](double v) { return 0.25 * std::abs(v) + 0.5 * std::abs(v - 1) + 0.25 * std::abs(v - 2); };
  double m = 0, m2 = 0;
  for (double v : x) {
    const double h = std::abs(v - 1.0) - e_abs(v);
    m += h;
    m2 += h * h;
  }
  m /= n;
  const double se = std::sqrt((m2 / n - m * m) / n);
  CHECK(std::abs(crps_empirical(x, 1.0) - 0.125) < 3 * se);
}

TEST_CASE("quantile loss") {
  CHECK(quantile_loss(10, 10) == 0.0);
  CHECK(quantile_loss(10, 5, 0.99) == doctest::Approx(0.05));
  CHECK(quantile_loss(10, 15, 0.99) == doctest::Approx(4.95));

  // expected pinball loss is smallest at the true quantile
  Rng rng(6);
  std::vector<double> x(10000);
  for (auto& v : x) v = rng.normal();
  auto mean_loss = [&](double q) {
    double s = 0;
    for (double v : x) s += quantile_loss(q, v, 0.9);
    return s / x.size();
  };
  const double q90 = 1.2815515655446004;
  CHECK(mean_loss(q90) < mean_loss(q90 - 0.3));
  CHECK(mean_loss(q90) < mean_loss(q90 + 0.3));
}

TEST_CASE("rmse") {
  CHECK(rmse(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(rmse(std::vector<double>{0, 2}, std::vector<double>{0, 0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS(rmse(std::vector<double>{0, 2}, std::vector<double>{0}));
}
