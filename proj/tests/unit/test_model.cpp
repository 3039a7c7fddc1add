#include <doctest.h>

#include <cmath>

#include "frailty/error.hpp"
#include "frailty/hazard.hpp"
#include "frailty/model.hpp"
#include "frailty/prediction.hpp"
#include "frailty/rng.hpp"

using namespace frailty;

namespace {

SynthResult small_panel(std::uint64_t seed, int loans = 300, int periods = 5, int sites = 30) {
  SynthConfig c;
  c.n_loans = loans;
  c.n_periods = periods;
  c.n_sites = sites;
  c.seed = seed;
  return generate_synthetic(c);
}

}  // namespace

TEST_CASE("init_F0") {
  const std::vector<int> half{0, 1, 0, 1};
  CHECK(init_F0(half) == doctest::Approx(0.0));
  std::vector<int> tenth(10, 0);
  tenth[3] = 1;
  CHECK(init_F0(tenth) == doctest::Approx(-2.1972245773362196).epsilon(1e-12));
  const std::vector<int> none(5, 0);
  CHECK_THROWS_AS(init_F0(none), ValidationError);
  std::vector<int> rare(2000000, 0);
  rare[0] = 1;
  CHECK(init_F0(rare) == doctest::Approx(logit(1e-6)).epsilon(1e-9));
}

TEST_CASE("model kind names") {
  for (auto k : {ModelKind::linear_independent, ModelKind::linear_spatial, ModelKind::linear_spacetime,
                 ModelKind::boost_spacetime}) {
    CHECK(model_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS(model_kind_from_string("linear"));
}

TEST_CASE("independent fit on intercept-only data") {
  std::string csv = "loan_id,year,lon,lat,default,balance\n";
  for (int i = 0; i < 50; ++i) {
    csv += "L" + std::to_string(i) + ",2001,0,0," + (i < 10 ? "1" : "0") + ",1\n";
  }
  const PanelDataset d = parse_panel(csv, FeatureSchema{});
  const FittedModel m = fit_linear(d, ModelKind::linear_independent);
  REQUIRE(m.beta.size() == 1);
  CHECK(m.beta[0] == doctest::Approx(logit(0.2)).epsilon(1e-8));
  const Eigen::VectorXd p = predict_default_probs(m, d).probs;
  for (Eigen::Index i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(0.2).epsilon(1e-8));
}

TEST_CASE("degenerate prior: GP kinds reproduce the independent fit") {
  const auto r = small_panel(4);
  const FittedModel ind = fit_linear(r.data, ModelKind::linear_independent);
  FitOptions o;
  o.fix_sigma2 = true;
  for (auto kind : {ModelKind::linear_spatial, ModelKind::linear_spacetime}) {
    o.theta0 = CovarianceParams{1e-10, 0.3, kind == ModelKind::linear_spacetime
                                                 ? std::optional<double>(2.0)
                                                 : std::nullopt};
    const FittedModel gp = fit_linear(r.data, kind, o);
    CHECK((gp.beta - ind.beta).cwiseAbs().maxCoeff() < 1e-3);
    const Eigen::VectorXd pa = predict_default_probs(ind, r.data).probs;
    const Eigen::VectorXd pb = predict_default_probs(gp, r.data).probs;
    CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("linear spatial fit recovers coefficients") {
  SynthConfig c;
  c.n_loans = 3500;
  c.n_periods = 6;
  c.n_sites = 150;
  c.mode = SynthMode::linear;
  c.beta = {1.0, -1.0};
  c.n_features = 2;
  c.baseline = -2.0;
  c.sigma2 = 0.5;
  c.rho_s = 0.2;
  c.rho_t = std::nullopt;
  c.seed = 21;
  const auto r = generate_synthetic(c);
  CHECK(r.data.size() >= 8000);
  const FittedModel m = fit_linear(r.data, ModelKind::linear_spatial);
  REQUIRE(m.beta.size() == 3);
  CHECK(std::abs(m.beta[1] - 1.0) < 0.15);
  CHECK(std::abs(m.beta[2] + 1.0) < 0.15);
  REQUIRE(m.latent);
  CHECK(m.latent->theta.sigma2 > 0.25);
  CHECK(m.latent->theta.sigma2 < 1.0);
}

TEST_CASE("boosting with zero iterations") {
  const auto r = small_panel(5);
  TreeTuning t;
  t.max_trees = 0;
  const BoostResult b = fit_boosted(r.data, t);
  CHECK(b.model.trees.empty());
  CHECK(b.trace.empty());
  REQUIRE(b.model.latent);
  const Eigen::VectorXd F = b.model.fixed_effects(r.data);
  CHECK((F.array() == b.model.F0).all());
}

TEST_CASE("boosting trace is non-increasing") {
  const auto r = small_panel(6, 300, 5, 25);
  TreeTuning t;
  t.max_trees = 20;
  t.learning_rate = 0.1;
  t.max_depth = 3;
  const BoostResult b = fit_boosted(r.data, t);
  REQUIRE(b.trace.size() == 20);
  for (std::size_t k = 1; k < b.trace.size(); ++k) {
    CHECK(b.trace[k].neg_log_marginal <= b.trace[k - 1].neg_log_marginal + 1e-6);
  }
}

TEST_CASE("tuning") {
  const auto r = small_panel(7, 300, 5, 25);
  const PanelDataset inner = r.data.periods(2000, 2003);
  const PanelDataset val = r.data.periods(2004, 2004);
  TuningGrid g;
  g.learning_rates = {0.5};
  g.max_depths = {2};
  g.min_samples_leaf = {10};
  g.l2_lambdas = {1.0};
  g.max_trees = 4;
  const TuningResult one = tune(inner, val, g);
  REQUIRE(one.report.size() == 1);
  CHECK(one.best.max_depth == 2);
  CHECK(one.best.max_trees == one.report[0].best_iteration);
  CHECK(one.report[0].best_iteration >= 1);

  g.max_depths = {2, 3};
  g.learning_rates = {0.5, 0.1};
  CHECK(tune(inner, val, g).report.size() == 4);
  CHECK_THROWS(g.combinations().at(4));
  CHECK(TuningGrid{}.combinations().size() == 108);
}

TEST_CASE("separable validation selects the shallow tree") {
  // default iff x1 > 0.5, no latent signal
  std::string csv = "loan_id,year,lon,lat,default,balance,x1,x2\n";
  Rng rng(3);
  int id = 0;
  for (int period = 2000; period <= 2003; ++period) {
    for (int i = 0; i < 120; ++i) {
      const double x1 = rng.uniform(), x2 = rng.uniform();
      csv += "L" + std::to_string(id++) + "," + std::to_string(period) + "," +
             format_number(rng.uniform()) + "," + format_number(rng.uniform()) + "," +
             (x1 > 0.5 ? "1" : "0") + ",1," + format_number(x1) + "," + format_number(x2) + "\n";
    }
  }
  const PanelDataset d = parse_panel(csv, parse_schema("x1,numeric\nx2,numeric\n"));
  TuningGrid g;
  g.learning_rates = {1.0};
  g.max_depths = {5, 2};
  g.min_samples_leaf = {10};
  g.l2_lambdas = {0.0};
  g.max_trees = 3;
  const TuningResult tr = tune(d.periods(2000, 2002), d.periods(2003, 2003), g);
  CHECK(tr.report[1].validation_auc == doctest::Approx(1.0));
  CHECK(tr.best.max_depth == 2);
}

TEST_CASE("model serialization") {
  const auto r = small_panel(8, 200, 4, 20);
  TreeTuning t;
  t.max_trees = 3;
  const FittedModel a = fit_boosted(r.data, t).model;
  const FittedModel b = fit_boosted(r.data, t).model;
  const std::string sa = serialize_model(a);
  CHECK(sa == serialize_model(b));
  const FittedModel back = parse_model(sa);
  CHECK(serialize_model(back) == sa);
  const Eigen::VectorXd p1 = predict_default_probs(a, r.data).probs;
  const Eigen::VectorXd p2 = predict_default_probs(back, r.data).probs;
  CHECK(p1 == p2);

  const FittedModel lin = fit_linear(r.data, ModelKind::linear_spatial);
  CHECK(serialize_model(parse_model(serialize_model(lin))) == serialize_model(lin));
  CHECK_THROWS_AS(parse_model("{\"format\": \"other\"}"), ValidationError);
  CHECK_THROWS_AS(parse_model("not json"), ParseError);
}
