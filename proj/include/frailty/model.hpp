#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "frailty/covariance.hpp"
#include "frailty/gbt.hpp"
#include "frailty/laplace.hpp"
#include "frailty/panel.hpp"
#include "frailty/vecchia.hpp"

namespace frailty {

enum class ModelKind { linear_independent, linear_spatial, linear_spacetime, boost_spacetime };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
bool has_latent_process(ModelKind kind);
CovarianceMode covariance_mode(ModelKind kind);

// Training-time latent state needed to rebuild prediction structures.
struct LatentState {
  LatentGaussianModel::Config config;
  CovarianceParams theta;
  std::vector<SpaceTimePoint> points;
  std::vector<int> order;
  NeighborSets neighbors;
  Eigen::VectorXd mode;  // posterior mode b-hat, point indexing
  Eigen::VectorXd W;     // curvature at the mode
};

struct FittedModel {
  ModelKind kind = ModelKind::linear_independent;
  FeatureSchema schema;
  Imputer imputer;
  DesignEncoder encoder;

  Eigen::VectorXd beta;  // linear kinds, aligned with encoder.columns()

  double F0 = 0.0;  // boosted kind
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  std::optional<LatentState> latent;
  double objective = 0.0;  // log marginal likelihood at the fit
  std::vector<std::string> warnings;

  // Fixed effects F(x) for a dataset using the frozen imputer and encoder.
  Eigen::VectorXd fixed_effects(const PanelDataset& data) const;
  Eigen::VectorXd fixed_effects(const DesignMatrix& design) const;
  DesignMatrix design(const PanelDataset& data) const;
};

struct FitOptions {
  Smoothness nu = Smoothness::three_halves;
  int num_neighbors = 20;
  std::uint64_t seed = 1;
  std::optional<CovarianceParams> theta0;  // default: initial_theta()
  bool fix_sigma2 = false;                 // keep theta0.sigma2 (degenerate-prior checks)
  bool include_year = true;
  double jitter = kDefaultJitter;
  // linear GP kinds
  int max_outer = 50;
  double outer_tol = 1e-6;
  int lbfgs_budget = 100;
  // boosted kind
  int theta_steps_per_iteration = 10;
  // Stop boosting once validation AUC has not improved for this many
  // iterations (0 disables; only used when a validation set is given).
  int patience = 0;
};

// theta_0 = (1, 0.3 * diameter of the data's bounding box, 2 periods).
CovarianceParams initial_theta(const PanelDataset& data, CovarianceMode mode,
                               Smoothness nu = Smoothness::three_halves);

// logit of the empirical default rate, clamped to [1e-6, 1 - 1e-6].
double init_F0(std::span<const int> y);

FittedModel fit_linear(const PanelDataset& train, ModelKind kind, const FitOptions& options = {});

struct BoostTraceEntry {
  int iteration = 0;
  double neg_log_marginal = 0.0;  // at (F_m, theta_m)
  CovarianceParams theta;
  std::optional<double> validation_auc;
};

struct BoostResult {
  FittedModel model;
  std::vector<BoostTraceEntry> trace;
};

// Boosting with per-iteration covariance updates. When validation is given,
// its AUC is recorded after every iteration.
BoostResult fit_boosted(const PanelDataset& train, const TreeTuning& tuning,
                        const FitOptions& options = {},
                        const PanelDataset* validation = nullptr);

struct TuningReportRow {
  TreeTuning tuning;  // max_trees = best iteration count
  int best_iteration = 0;
  double validation_auc = 0.0;
};

struct TuningResult {
  TreeTuning best;
  std::vector<TuningReportRow> report;
};

// Table of candidate values; every combination is fitted.
struct TuningGrid {
  std::vector<double> learning_rates{10.0, 1.0, 0.1};
  std::vector<int> max_depths{2, 3, 5, 10};
  std::vector<int> min_samples_leaf{10, 100, 1000};
  std::vector<double> l2_lambdas{0.0, 1.0, 10.0};
  int max_trees = 1000;

  std::vector<TreeTuning> combinations() const;
};

TuningResult tune(const PanelDataset& inner_train, const PanelDataset& validation,
                  const TuningGrid& grid, const FitOptions& options = {});

// Structured-text model file.
std::string serialize_model(const FittedModel& model);
FittedModel parse_model(const std::string& text);
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

}  // namespace frailty
