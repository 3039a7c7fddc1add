#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "frailty/model.hpp"

namespace frailty {

struct LatentPredictive {
  Eigen::VectorXd mean;  // conditioned on training points only
  Eigen::VectorXd var;
  // Joint law when requested: prediction points also condition on earlier
  // prediction points (listed after all training points in the ordering).
  Eigen::VectorXd joint_mean;
  Eigen::MatrixXd joint_cov;
  std::vector<std::string> warnings;

  bool has_joint() const { return joint_cov.size() > 0; }
};

LatentPredictive latent_predict(const LatentState& state,
                                std::span<const SpaceTimePoint> points, bool want_joint = false);

inline constexpr int kDefaultQuadratureNodes = 20;

// Gauss-Hermite nodes and weights for the weight exp(-x^2).
const std::pair<std::vector<double>, std::vector<double>>& gauss_hermite(int nodes);

// Integral of link(F + z) N(z; mu, v) dz by adaptive Gauss-Hermite quadrature.
double response_probability(double F, double mu, double v, int nodes = kDefaultQuadratureNodes);

// Unique latent keys of a panel under the model's covariance mode.
LatentIndex prediction_index(const FittedModel& model, const PanelDataset& data);

struct ProbabilityPrediction {
  Eigen::VectorXd fixed;  // F per observation
  Eigen::VectorXd probs;
  LatentIndex index;      // empty for independent models
  LatentPredictive latent;
};

ProbabilityPrediction predict_default_probs(const FittedModel& model, const PanelDataset& data,
                                            int nodes = kDefaultQuadratureNodes,
                                            bool want_joint = false);

struct FrailtyMapRow {
  int period = 0;
  double lon = 0.0;
  double lat = 0.0;
  double posterior_mean = 0.0;
};

// Posterior means at the training latent points.
std::vector<FrailtyMapRow> frailty_map(const FittedModel& model);
// Posterior means on a list of locations for each period.
std::vector<FrailtyMapRow> frailty_map(const FittedModel& model, std::span<const int> periods,
                                       std::span<const std::pair<double, double>> locations);

std::string format_frailty_map(std::span<const FrailtyMapRow> rows);

}  // namespace frailty
