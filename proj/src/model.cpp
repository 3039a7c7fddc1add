#include "frailty/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "frailty/error.hpp"
#include "frailty/hazard.hpp"
#include "frailty/prediction.hpp"
#include "frailty/scoring.hpp"

namespace frailty {

using json = nlohmann::ordered_json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear_independent: return "linear-independent";
    case ModelKind::linear_spatial: return "linear-spatial";
    case ModelKind::linear_spacetime: return "linear-spacetime";
    case ModelKind::boost_spacetime: return "boost-spacetime";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  for (auto k : {ModelKind::linear_independent, ModelKind::linear_spatial,
                 ModelKind::linear_spacetime, ModelKind::boost_spacetime}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown model kind: " + name);
}

bool has_latent_process(ModelKind kind) { return kind != ModelKind::linear_independent; }

CovarianceMode covariance_mode(ModelKind kind) {
  return kind == ModelKind::linear_spatial ? CovarianceMode::spatial : CovarianceMode::spacetime;
}

DesignMatrix FittedModel::design(const PanelDataset& data) const {
  return encoder.transform(imputer.apply(data));
}

Eigen::VectorXd FittedModel::fixed_effects(const DesignMatrix& d) const {
  if (kind == ModelKind::boost_spacetime) return predict_ensemble(trees, learning_rate, F0, d.X);
  if (d.X.cols() != beta.size()) throw ValidationError("design width differs from the coefficients");
  return d.X * beta;
}

Eigen::VectorXd FittedModel::fixed_effects(const PanelDataset& data) const {
  return fixed_effects(design(data));
}

CovarianceParams initial_theta(const PanelDataset& data, CovarianceMode mode, Smoothness nu) {
  double lon_lo = std::numeric_limits<double>::infinity(), lon_hi = -lon_lo;
  double lat_lo = lon_lo, lat_hi = lon_hi;
  for (const auto& o : data.observations()) {
    lon_lo = std::min(lon_lo, o.lon);
    lon_hi = std::max(lon_hi, o.lon);
    lat_lo = std::min(lat_lo, o.lat);
    lat_hi = std::max(lat_hi, o.lat);
  }
  const double diameter = data.size() ? std::hypot(lon_hi - lon_lo, lat_hi - lat_lo) : 0.0;
  CovarianceParams theta;
  theta.sigma2 = 1.0;
  theta.rho_s = diameter > 0.0 ? 0.3 * diameter : 1.0;
  if (mode == CovarianceMode::spacetime) theta.rho_t = 2.0;
  theta.nu = nu;
  return theta;
}

double init_F0(std::span<const int> y) {
  if (y.empty()) throw ValidationError("init_F0: no observations");
  double s = 0.0;
  for (int v : y) s += v;
  if (s == 0.0 || s == static_cast<double>(y.size())) {
    throw ValidationError("init_F0: labels contain a single class");
  }
  return logit(std::clamp(s / static_cast<double>(y.size()), 1e-6, 1.0 - 1e-6));
}

namespace {

struct IndependentFit {
  Eigen::VectorXd beta;
  double negloglik = 0.0;
  bool ridge = false;
};

IndependentFit newton_independent(const Eigen::MatrixXd& X, std::span<const int> y, double ridge) {
  const auto p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto objective = [&](const Eigen::VectorXd& b) {
    NegLogLik nl = independent_negloglik(b, X, y);
    nl.value += 0.5 * ridge * b.squaredNorm();
    nl.gradient += ridge * b;
    return nl;
  };
  NegLogLik cur = objective(beta);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double pr = link(eta[i]);
      w[i] = pr * (1.0 - pr);
    }
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    H.diagonal().array() += ridge + 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    const Eigen::VectorXd step = H.ldlt().solve(cur.gradient);
    double alpha = 1.0;
    NegLogLik next = objective(beta - step);
    for (int h = 0; h < 40 && !(next.value <= cur.value); ++h) {
      alpha *= 0.5;
      next = objective(beta - alpha * step);
    }
    if (!(next.value <= cur.value)) break;
    beta -= alpha * step;
    const double change = cur.value - next.value;
    cur = std::move(next);
    if ((alpha * step).lpNorm<Eigen::Infinity>() < 1e-8 ||
        change <= 1e-14 * std::max(1.0, cur.value)) {
      return {beta, cur.value, ridge > 0.0};
    }
    if (beta.lpNorm<Eigen::Infinity>() > 50.0 && ridge == 0.0) break;
  }
  if (ridge == 0.0 && (beta.lpNorm<Eigen::Infinity>() > 50.0 || !beta.allFinite())) {
    return {Eigen::VectorXd(), 0.0, false};  // signals separation
  }
  return {beta, cur.value, ridge > 0.0};
}

IndependentFit fit_independent(const Eigen::MatrixXd& X, std::span<const int> y,
                               std::vector<std::string>& warnings) {
  IndependentFit fit = newton_independent(X, y, 0.0);
  if (fit.beta.size() == 0) {
    warnings.push_back("separation detected; refitted with ridge penalty 1e-6");
    fit = newton_independent(X, y, 1e-6);
  }
  return fit;
}

LatentState snapshot(const LatentGaussianModel& gp, const CovarianceParams& theta) {
  if (!gp.last_state()) throw NumericalError("latent model has not been evaluated");
  LatentState s;
  s.config = gp.config();
  s.theta = theta;
  s.points = gp.incidence().points;
  s.order = gp.order();
  s.neighbors = gp.neighbors();
  s.mode = gp.last_state()->mode;
  s.W = gp.last_state()->W;
  return s;
}

LatentGaussianModel::Config latent_config(CovarianceMode mode, const FitOptions& o) {
  LatentGaussianModel::Config c;
  c.mode = mode;
  c.nu = o.nu;
  c.num_neighbors = o.num_neighbors;
  c.ordering_seed = o.seed;
  c.jitter = o.jitter;
  return c;
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Newton-type ascent in beta for fixed theta. The gradient is exact; the
// curvature drops the log-determinant term.
double beta_step(LatentGaussianModel& gp, const Eigen::MatrixXd& X, Eigen::VectorXd& beta,
                 const CovarianceParams& theta, int max_iter) {
  const auto& z = gp.incidence().obs_to_latent;
  Eigen::VectorXd F = X * beta;
  auto ev = gp.evaluate(as_span(F), theta, true, false);
  double f = ev.objective;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd g = X.transpose() * ev.grad_F;
    if (g.lpNorm<Eigen::Infinity>() < 1e-8 * std::max(1.0, std::abs(f))) break;
    const auto nb = static_cast<Eigen::Index>(gp.incidence().points.size());
    Eigen::VectorXd w(F.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nb, X.cols());
    for (Eigen::Index j = 0; j < F.size(); ++j) {
      const double p = link(F[j] + ev.state.mode[z[j]]);
      w[j] = p * (1.0 - p);
      M.row(z[j]) += w[j] * X.row(j);
    }
    Eigen::MatrixXd solved(nb, X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) solved.col(c) = gp.posterior_factor().solve(M.col(c));
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X - M.transpose() * solved;
    H = 0.5 * (H + H.transpose());
    H.diagonal().array() += 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
    const Eigen::VectorXd step = H.ldlt().solve(g);
    double alpha = 1.0;
    bool accepted = false, stalled = false;
    for (int h = 0; h < 30; ++h) {
      const Eigen::VectorXd trial = beta + alpha * step;
      const Eigen::VectorXd Ft = X * trial;
      try {
        auto et = gp.evaluate(as_span(Ft), theta, true, false);
        if (et.objective >= f) {
          const double gain = et.objective - f;
          beta = trial;
          F = Ft;
          f = et.objective;
          ev = std::move(et);
          accepted = true;
          stalled = gain < 1e-12 * std::max(1.0, std::abs(f));
          break;
        }
      } catch (const NumericalError&) {
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      gp.evaluate(as_span(F), theta, false, false);
      break;
    }
    if (stalled) break;
  }
  return f;
}

}  // namespace

FittedModel fit_linear(const PanelDataset& train, ModelKind kind, const FitOptions& options) {
  if (kind == ModelKind::boost_spacetime) throw ValidationError("fit_linear: boosted kind requested");
  if (train.size() == 0) throw ValidationError("fit_linear: empty training data");
  FittedModel model;
  model.kind = kind;
  model.schema = train.schema();
  model.imputer = Imputer::fit(train);
  const PanelDataset data = model.imputer.apply(train);
  model.encoder = DesignEncoder::fit(data, DesignMode::linear, options.include_year);
  const Eigen::MatrixXd X = model.encoder.transform(data).X;
  const std::vector<int> y = data.labels();

  const IndependentFit ind = fit_independent(X, y, model.warnings);
  model.beta = ind.beta;
  model.objective = -ind.negloglik;
  if (kind == ModelKind::linear_independent) return model;

  const CovarianceMode mode = covariance_mode(kind);
  CovarianceParams theta = options.theta0.value_or(initial_theta(data, mode, options.nu));
  if (theta.mode() != mode) throw ValidationError("fit_linear: theta0 does not match the model kind");
  theta.nu = options.nu;
  LatentGaussianModel gp(build_latent_index(data, mode), y, latent_config(mode, options), theta);

  OptimizerOptions opt;
  opt.method = OptimizerMethod::lbfgs;
  opt.budget = options.lbfgs_budget;
  opt.fix_sigma2 = options.fix_sigma2;
  Eigen::VectorXd beta = model.beta;
  Eigen::VectorXd F = X * beta;
  double f = gp.marginal_loglik(as_span(F), theta);
  bool converged = false;
  for (int cycle = 0; cycle < options.max_outer; ++cycle) {
    const OptimizeResult r = gp.optimize_theta(as_span(F), theta, opt);
    theta = r.theta;
    const double f_new = beta_step(gp, X, beta, theta, 5);
    F = X * beta;
    const double change = std::abs(f_new - f);
    f = f_new;
    if (change < options.outer_tol * std::max(1.0, std::abs(f))) {
      converged = true;
      break;
    }
  }
  if (!converged) model.warnings.push_back("outer (beta, theta) cycles hit the iteration cap");
  // Cache the mode at the final (beta, theta).
  model.objective = gp.marginal_loglik(as_span(F), theta);
  model.beta = beta;
  model.latent = snapshot(gp, theta);
  return model;
}

BoostResult fit_boosted(const PanelDataset& train, const TreeTuning& tuning,
                        const FitOptions& options, const PanelDataset* validation) {
  tuning.validate();
  if (train.size() == 0) throw ValidationError("fit_boosted: empty training data");
  BoostResult res;
  FittedModel& model = res.model;
  model.kind = ModelKind::boost_spacetime;
  model.schema = train.schema();
  model.imputer = Imputer::fit(train);
  const PanelDataset data = model.imputer.apply(train);
  model.encoder = DesignEncoder::fit(data, DesignMode::tree, options.include_year);
  const Eigen::MatrixXd X = model.encoder.transform(data).X;
  const std::vector<int> y = data.labels();
  model.F0 = init_F0(y);
  model.learning_rate = tuning.learning_rate;

  const CovarianceMode mode = CovarianceMode::spacetime;
  CovarianceParams theta = options.theta0.value_or(initial_theta(data, mode, options.nu));
  if (theta.mode() != mode) throw ValidationError("fit_boosted: theta0 must be spatio-temporal");
  theta.nu = options.nu;
  LatentGaussianModel gp(build_latent_index(data, mode), y, latent_config(mode, options), theta);

  Eigen::MatrixXd X_val;
  Eigen::VectorXd F_val;
  std::vector<int> y_val;
  LatentIndex val_index;
  if (validation) {
    const DesignMatrix dv = model.design(*validation);
    X_val = dv.X;
    F_val = Eigen::VectorXd::Constant(X_val.rows(), model.F0);
    y_val = validation->labels();
    val_index = build_latent_index(*validation, mode);
  }

  OptimizerOptions opt;
  opt.method = OptimizerMethod::nesterov;
  opt.budget = options.theta_steps_per_iteration;
  opt.fix_sigma2 = options.fix_sigma2;

  Eigen::VectorXd F = Eigen::VectorXd::Constant(X.rows(), model.F0);
  double best_auc = -1.0;
  int best_at = 0;
  if (tuning.max_trees == 0) {
    theta = gp.optimize_theta(as_span(F), theta, opt).theta;
  }
  for (int m = 1; m <= tuning.max_trees; ++m) {
    try {
      theta = gp.optimize_theta(as_span(F), theta, opt).theta;
      const auto ev = gp.evaluate(as_span(F), theta, true, false);
      RegressionTree tree = fit_tree(X, as_span(ev.grad_F), tuning);
      F += tuning.learning_rate * predict_tree(tree, X);
      if (validation) F_val += tuning.learning_rate * predict_tree(tree, X_val);
      model.trees.push_back(std::move(tree));
      BoostTraceEntry e;
      e.iteration = m;
      e.neg_log_marginal = -gp.marginal_loglik(as_span(F), theta);
      e.theta = theta;
      if (validation) {
        const LatentPredictive lp = latent_predict(snapshot(gp, theta), val_index.points, false);
        Eigen::VectorXd p(F_val.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const int k = val_index.obs_to_latent[i];
          p[i] = response_probability(F_val[i], lp.mean[k], lp.var[k]);
        }
        e.validation_auc = auc(as_span(p), y_val);
        if (*e.validation_auc > best_auc) {
          best_auc = *e.validation_auc;
          best_at = m;
        }
      }
      res.trace.push_back(e);
      if (validation && options.patience > 0 && m - best_at >= options.patience) break;
    } catch (const NumericalError& err) {
      const std::string what = "boosting iteration " + std::to_string(m) + ": " + err.what();
      // During tuning a diverging candidate keeps the iterations it completed.
      if (!validation || res.trace.empty()) throw NumericalError(what);
      model.warnings.push_back(what + "; stopped early");
      model.trees.resize(res.trace.size());
      res.model.latent.reset();
      return res;
    }
  }
  model.objective = gp.marginal_loglik(as_span(F), theta);
  model.latent = snapshot(gp, theta);
  return res;
}

std::vector<TreeTuning> TuningGrid::combinations() const {
  std::vector<TreeTuning> out;
  for (double lr : learning_rates) {
    for (int depth : max_depths) {
      for (int leaf : min_samples_leaf) {
        for (double lambda : l2_lambdas) {
          TreeTuning t;
          t.learning_rate = lr;
          t.max_depth = depth;
          t.min_samples_leaf = leaf;
          t.l2_lambda = lambda;
          t.max_trees = max_trees;
          out.push_back(t);
        }
      }
    }
  }
  return out;
}

TuningResult tune(const PanelDataset& inner_train, const PanelDataset& validation,
                  const TuningGrid& grid, const FitOptions& options) {
  if (validation.size() == 0) throw ValidationError("tune: empty validation data");
  const auto combos = grid.combinations();
  if (combos.empty()) throw ValidationError("tune: empty grid");
  TuningResult result;
  bool have_best = false;
  TuningReportRow best;
  for (const TreeTuning& t : combos) {
    const BoostResult br = fit_boosted(inner_train, t, options, &validation);
    TuningReportRow row;
    row.tuning = t;
    row.best_iteration = 0;
    row.validation_auc = -1.0;
    for (const auto& e : br.trace) {
      if (*e.validation_auc > row.validation_auc) {
        row.validation_auc = *e.validation_auc;
        row.best_iteration = e.iteration;
      }
    }
    row.tuning.max_trees = row.best_iteration;
    result.report.push_back(row);
    const bool better =
        !have_best || row.validation_auc > best.validation_auc ||
        (row.validation_auc == best.validation_auc &&
         (row.best_iteration < best.best_iteration ||
          (row.best_iteration == best.best_iteration &&
           row.tuning.max_depth < best.tuning.max_depth)));
    if (better) {
      best = row;
      have_best = true;
    }
  }
  result.best = best.tuning;
  return result;
}

// ---------------------------------------------------------------- serialization

namespace {

json num(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double num_of(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
Eigen::VectorXd vec_of(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

std::string serialize_model(const FittedModel& m) {
  json j;
  j["format"] = "frailty-model";
  j["version"] = 1;
  j["kind"] = to_string(m.kind);
  json schema = json::array();
  for (const auto& f : m.schema.features) {
    schema.push_back({{"name", f.name},
                      {"kind", f.kind == FeatureKind::numeric ? "numeric" : "categorical"},
                      {"levels", f.levels}});
  }
  j["schema"] = schema;
  json imp = json::array();
  for (const auto& c : m.imputer.fill_values()) imp.push_back({{"value", num(c.value)}, {"level", c.level}});
  j["imputer"] = imp;
  j["encoder"] = {{"mode", m.encoder.mode() == DesignMode::linear ? "linear" : "tree"},
                  {"include_year", m.encoder.include_year()},
                  {"levels", m.encoder.levels()}};
  if (m.kind == ModelKind::boost_spacetime) {
    json trees = json::array();
    for (const auto& t : m.trees) {
      json nodes = json::array();
      for (const auto& n : t.nodes()) {
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.count});
      }
      trees.push_back({{"num_features", t.num_features()}, {"nodes", nodes}});
    }
    j["boost"] = {{"F0", m.F0}, {"learning_rate", m.learning_rate}, {"trees", trees}};
  } else {
    j["beta"] = vec_json(m.beta);
  }
  if (m.latent) {
    const auto& s = *m.latent;
    json lat;
    lat["mode"] = s.config.mode == CovarianceMode::spacetime ? "spacetime" : "spatial";
    lat["nu"] = smoothness_value(s.config.nu);
    lat["num_neighbors"] = s.config.num_neighbors;
    lat["ordering_seed"] = s.config.ordering_seed;
    lat["jitter"] = s.config.jitter;
    lat["theta"] = {{"sigma2", s.theta.sigma2}, {"rho_s", s.theta.rho_s}};
    if (s.theta.rho_t) lat["theta"]["rho_t"] = *s.theta.rho_t;
    json pts = json::array();
    for (const auto& p : s.points) pts.push_back({p.t, p.x, p.y});
    lat["points"] = pts;
    lat["order"] = s.order;
    lat["neighbors"] = s.neighbors;
    lat["b_hat"] = vec_json(s.mode);
    lat["W"] = vec_json(s.W);
    j["latent"] = lat;
  }
  j["objective"] = m.objective;
  j["warnings"] = m.warnings;
  return j.dump(1) + "\n";
}

FittedModel parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what(), 0);
  }
  try {
    if (j.at("format") != "frailty-model") throw ValidationError("not a model file");
    FittedModel m;
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    for (const auto& f : j.at("schema")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      spec.kind = f.at("kind") == "numeric" ? FeatureKind::numeric : FeatureKind::categorical;
      spec.levels = f.at("levels").get<std::vector<std::string>>();
      m.schema.features.push_back(std::move(spec));
    }
    m.schema.validate();
    std::vector<Cell> fill;
    for (const auto& c : j.at("imputer")) {
      Cell cell;
      cell.value = num_of(c.at("value"));
      cell.level = c.at("level").get<std::string>();
      fill.push_back(std::move(cell));
    }
    m.imputer = Imputer::from_values(std::move(fill));
    const auto& enc = j.at("encoder");
    m.encoder = DesignEncoder::from_parts(
        m.schema, enc.at("mode") == "linear" ? DesignMode::linear : DesignMode::tree,
        enc.at("include_year").get<bool>(),
        enc.at("levels").get<std::vector<std::vector<std::string>>>());
    if (m.kind == ModelKind::boost_spacetime) {
      const auto& b = j.at("boost");
      m.F0 = b.at("F0").get<double>();
      m.learning_rate = b.at("learning_rate").get<double>();
      for (const auto& t : b.at("trees")) {
        std::vector<TreeNode> nodes;
        for (const auto& n : t.at("nodes")) {
          TreeNode node;
          node.feature = n.at(0).get<int>();
          node.threshold = n.at(1).get<double>();
          node.left = n.at(2).get<int>();
          node.right = n.at(3).get<int>();
          node.value = n.at(4).get<double>();
          node.count = n.at(5).get<int>();
          nodes.push_back(node);
        }
        m.trees.emplace_back(std::move(nodes), t.at("num_features").get<int>());
      }
    } else {
      m.beta = vec_of(j.at("beta"));
    }
    if (j.contains("latent")) {
      const auto& lat = j.at("latent");
      LatentState s;
      s.config.mode = lat.at("mode") == "spacetime" ? CovarianceMode::spacetime : CovarianceMode::spatial;
      s.config.nu = smoothness_from_value(lat.at("nu").get<double>());
      s.config.num_neighbors = lat.at("num_neighbors").get<int>();
      s.config.ordering_seed = lat.at("ordering_seed").get<std::uint64_t>();
      s.config.jitter = lat.at("jitter").get<double>();
      s.theta.sigma2 = lat.at("theta").at("sigma2").get<double>();
      s.theta.rho_s = lat.at("theta").at("rho_s").get<double>();
      if (lat.at("theta").contains("rho_t")) s.theta.rho_t = lat.at("theta").at("rho_t").get<double>();
      s.theta.nu = s.config.nu;
      s.theta.validate();
      for (const auto& p : lat.at("points")) {
        s.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
      }
      s.order = lat.at("order").get<std::vector<int>>();
      s.neighbors = lat.at("neighbors").get<NeighborSets>();
      s.mode = vec_of(lat.at("b_hat"));
      s.W = vec_of(lat.at("W"));
      const auto n = s.points.size();
      if (s.order.size() != n || s.neighbors.size() != n ||
          static_cast<std::size_t>(s.mode.size()) != n || static_cast<std::size_t>(s.W.size()) != n) {
        throw ValidationError("model file: latent state lengths disagree");
      }
      m.latent = std::move(s);
    } else if (has_latent_process(m.kind)) {
      throw ValidationError("model file: latent state missing for kind " + to_string(m.kind));
    }
    m.objective = j.at("objective").get<double>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize_model(model);
  if (!out) throw Error("failed writing " + path);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace frailty
