#include <doctest.h>

#include <cmath>

#include "frailty/error.hpp"
#include "frailty/hazard.hpp"
#include "frailty/prediction.hpp"
#include "support/oracles.hpp"

using namespace frailty;

namespace {

// Latent state from a Laplace fit at fixed theta.
LatentState fitted_state(const LatentIndex& index, const std::vector<int>& y,
                         const std::vector<double>& F, const CovarianceParams& theta, int m) {
  LatentGaussianModel::Config cfg;
  cfg.mode = theta.mode();
  cfg.num_neighbors = m;
  LatentGaussianModel gp(index, y, cfg, theta);
  const auto ev = gp.evaluate(F, theta, false, false);
  LatentState s;
  s.config = cfg;
  s.theta = theta;
  s.points = index.points;
  s.order = gp.order();
  s.neighbors = gp.neighbors();
  s.mode = ev.state.mode;
  s.W = ev.state.W;
  return s;
}

struct Dense {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Gaussian conditioning with the posterior N(mode, (S^-1 + W)^-1) at training points.
Dense dense_predict(const LatentState& s, const std::vector<SpaceTimePoint>& pred) {
  const bool st = s.theta.rho_t.has_value();
  std::vector<SpaceTimePoint> all = s.points;
  all.insert(all.end(), pred.begin(), pred.end());
  const Eigen::MatrixXd S = oracle::dense_cov(all, s.theta.sigma2, s.theta.rho_s,
                                              st ? *s.theta.rho_t : 0.0, st, 1.5);
  const auto n = static_cast<Eigen::Index>(s.points.size());
  const auto k = static_cast<Eigen::Index>(pred.size());
  const Eigen::MatrixXd Stt = S.topLeftCorner(n, n);
  const Eigen::MatrixXd Spt = S.bottomLeftCorner(k, n);
  const Eigen::MatrixXd Spp = S.bottomRightCorner(k, k);
  const Eigen::MatrixXd K = Stt.llt().solve(Spt.transpose()).transpose();
  Eigen::MatrixXd post = Stt.inverse();
  post.diagonal() += s.W;
  const Eigen::MatrixXd Pcov = post.inverse();
  return {K * s.mode, Spp - K * Spt.transpose() + K * Pcov * K.transpose()};
}

struct Problem {
  LatentIndex index;
  std::vector<int> y;
  std::vector<double> F;
};

Problem random_problem(Rng& rng, int n_latent, int n_obs, int periods) {
  Problem p;
  p.index.points = oracle::random_points(rng, n_latent, periods);
  for (int j = 0; j < n_obs; ++j) {
    p.index.obs_to_latent.push_back(static_cast<int>(rng.index(static_cast<std::uint64_t>(n_latent))));
    p.y.push_back(rng.bernoulli(0.35));
    p.F.push_back(-0.6 + 0.5 * rng.normal());
  }
  return p;
}

}  // namespace

TEST_CASE("latent prediction at a training point returns its posterior mean") {
  Rng rng(1);
  const Problem p = random_problem(rng, 20, 80, 3);
  const CovarianceParams th{1.0, 0.3, 2.0};
  const LatentState s = fitted_state(p.index, p.y, p.F, th, 30);
  const std::vector<SpaceTimePoint> at{s.points[4], s.points[11]};
  const LatentPredictive lp = latent_predict(s, at);
  CHECK(lp.mean[0] == doctest::Approx(s.mode[4]).epsilon(1e-6));
  CHECK(lp.mean[1] == doctest::Approx(s.mode[11]).epsilon(1e-6));
}

TEST_CASE("far prediction point decorrelates") {
  Rng rng(2);
  const Problem p = random_problem(rng, 15, 60, 1);
  const CovarianceParams th{1.7, 0.2, std::nullopt};
  const LatentState s = fitted_state(p.index, p.y, p.F, th, 20);
  const std::vector<SpaceTimePoint> far{{0, 40.0, 40.0}};
  const LatentPredictive lp = latent_predict(s, far);
  CHECK(std::abs(lp.mean[0]) < 1e-6);
  CHECK(lp.var[0] == doctest::Approx(1.7).epsilon(0.01));
}

TEST_CASE("latent prediction equals dense Gaussian conditioning") {
  Rng rng(3);
  SUBCASE("three training points, one prediction point") {
    const Problem p = random_problem(rng, 3, 9, 2);
    const CovarianceParams th{0.9, 0.4, 1.5};
    const LatentState s = fitted_state(p.index, p.y, p.F, th, 3);
    const std::vector<SpaceTimePoint> pred{{2, 0.5, 0.5}};
    const LatentPredictive lp = latent_predict(s, pred);
    const Dense d = dense_predict(s, pred);
    CHECK(std::abs(lp.mean[0] - d.mean[0]) < 1e-6);
    CHECK(std::abs(lp.var[0] - d.cov(0, 0)) < 1e-6);
  }
  SUBCASE("fifty training points, joint law of several prediction points") {
    const Problem p = random_problem(rng, 50, 200, 4);
    const CovarianceParams th{1.3, 0.35, 2.0};
    const LatentState s = fitted_state(p.index, p.y, p.F, th, 60);
    const std::vector<SpaceTimePoint> pred{{4, 0.2, 0.3}, {4, 0.25, 0.35}, {3, 0.8, 0.1}, {4, 0.9, 0.9}};
    const LatentPredictive lp = latent_predict(s, pred, true);
    const Dense d = dense_predict(s, pred);
    CHECK((lp.mean - d.mean).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((lp.var - d.cov.diagonal()).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE(lp.has_joint());
    CHECK((lp.joint_mean - d.mean).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((lp.joint_cov - d.cov).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((lp.var.array() >= 0.0).all());
  }
}

TEST_CASE("distant periods are flagged") {
  Rng rng(4);
  const Problem p = random_problem(rng, 10, 30, 2);
  const CovarianceParams th{1.0, 0.3, 0.5};
  const LatentState s = fitted_state(p.index, p.y, p.F, th, 10);
  const std::vector<SpaceTimePoint> pred{{20, 0.5, 0.5}};
  CHECK_FALSE(latent_predict(s, pred).warnings.empty());
}

TEST_CASE("response probability") {
  CHECK(response_probability(0.7, -0.2, 0.0) == link(0.5));
  CHECK(response_probability(0.0, 0.0, 4.0) == 0.5);
  for (double v : {0.1, 1.0, 9.0, 100.0}) CHECK(response_probability(1.5, -1.5, v) == 0.5);

  // trapezoid rule with 10'000 nodes on mu +- 12 sd
  const double F = 1.0, mu = 0.5, v = 1.0, sd = std::sqrt(v);
  const int n = 10000;
  const double lo = mu - 12 * sd, h = 24 * sd / (n - 1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    acc += w * oracle::sigmoid(F + z) * std::exp(-0.5 * (z - mu) * (z - mu) / v) /
           std::sqrt(2 * std::numbers::pi * v);
  }
  CHECK(std::abs(response_probability(F, mu, v) - acc * h) < 1e-6);

  double prev = 0.0;
  for (int k = -20; k <= 20; ++k) {
    const double p = response_probability(0.25 * k, 0.3, 2.0);
    CHECK(p > prev);
    CHECK(p < 1.0);
    prev = p;
  }
  prev = 0.0;
  for (int k = -20; k <= 20; ++k) {
    const double p = response_probability(-0.4, 0.25 * k, 2.0);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("default probabilities") {
  SynthConfig c;
  c.n_loans = 200;
  c.n_periods = 4;
  c.n_sites = 10;
  c.seed = 5;
  const auto r = generate_synthetic(c);
  const FittedModel ind = fit_linear(r.data, ModelKind::linear_independent);
  const Eigen::VectorXd xb = ind.design(r.data).X * ind.beta;
  const Eigen::VectorXd p = predict_default_probs(ind, r.data).probs;
  for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p[i] == link(xb[i]));

  // two co-located same-period rows with equal predictors
  std::string csv = "loan_id,year,lon,lat,default,balance,x1,x2,x3,x4\n";
  csv += "A,2003,0.3,0.3,0,1,0.1,0.2,0.3,0.4\nB,2003,0.3,0.3,0,5,0.1,0.2,0.3,0.4\n";
  const PanelDataset twin = parse_panel(csv, r.data.schema());
  const FittedModel gp = fit_linear(r.data, ModelKind::linear_spacetime);
  const Eigen::VectorXd pt = predict_default_probs(gp, twin).probs;
  CHECK(pt[0] == pt[1]);
  CHECK(pt[0] > 0.0);
  CHECK(pt[0] < 1.0);
}

TEST_CASE("frailty map") {
  Rng rng(6);
  const Problem p = random_problem(rng, 12, 40, 2);
  const CovarianceParams th{1.0, 0.3, 2.0};
  FittedModel m;
  m.kind = ModelKind::linear_spacetime;
  m.latent = fitted_state(p.index, p.y, p.F, th, 20);
  const auto rows = frailty_map(m);
  REQUIRE(rows.size() == 12);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < m.latent->points.size(); ++i) {
      const auto& q = m.latent->points[i];
      if (q.t == row.period && q.x == row.lon && q.y == row.lat) {
        CHECK(row.posterior_mean == doctest::Approx(m.latent->mode[static_cast<Eigen::Index>(i)]));
      }
    }
  }
  const std::vector<int> none;
  const std::vector<std::pair<double, double>> no_locs;
  CHECK(format_frailty_map(frailty_map(m, none, no_locs)) == "period,lon,lat,posterior_mean\n");

  // hotspot: posterior mode peaked at the centre of a 7 x 7 training lattice
  LatentState s;
  s.config.mode = CovarianceMode::spatial;
  s.config.num_neighbors = 20;
  s.theta = {1.0, 0.25, std::nullopt};
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) s.points.push_back({0, i / 6.0, j / 6.0});
  }
  s.order = order_points(s.points, OrderingStrategy::random, 1);
  s.neighbors = select_neighbors(s.points, s.order, 20, NeighborMetric::euclidean, s.theta);
  s.mode.resize(49);
  s.W = Eigen::VectorXd::Ones(49);
  for (int k = 0; k < 49; ++k) {
    const double dx = s.points[static_cast<std::size_t>(k)].x - 0.5;
    const double dy = s.points[static_cast<std::size_t>(k)].y - 0.5;
    s.mode[k] = 2.0 * std::exp(-(dx * dx + dy * dy) / 0.05);
  }
  FittedModel hm;
  hm.kind = ModelKind::linear_spatial;
  hm.latent = s;
  std::vector<std::pair<double, double>> grid;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) grid.emplace_back(i / 10.0, j / 10.0);
  }
  const std::vector<int> period0{0};
  const auto hot = frailty_map(hm, period0, grid);
  const auto best = std::max_element(hot.begin(), hot.end(), [](const auto& a, const auto& b) {
    return a.posterior_mean < b.posterior_mean;
  });
  CHECK(std::abs(best->lon - 0.5) <= 0.1 + 1e-12);
  CHECK(std::abs(best->lat - 0.5) <= 0.1 + 1e-12);

  FittedModel plain;
  CHECK_THROWS(frailty_map(plain));
}
