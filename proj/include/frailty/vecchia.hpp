#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "frailty/covariance.hpp"

namespace frailty {

enum class OrderingStrategy { random, time_then_random };

enum class NeighborMetric { euclidean, correlation };

// order[i] is the point index placed at ordered position i.
std::vector<int> order_points(std::span<const SpaceTimePoint> points, OrderingStrategy strategy,
                              std::uint64_t seed);

// neighbors[i] holds ordered positions < i, sorted ascending.
using NeighborSets = std::vector<std::vector<int>>;

// Up to m earlier-ordered points closest to each point. The euclidean metric
// uses raw (t, lon, lat) coordinates; the correlation metric uses the scaled
// distance under params. Ties go to the smaller ordered position.
NeighborSets select_neighbors(std::span<const SpaceTimePoint> points, std::span<const int> order,
                              int m, NeighborMetric metric, const CovarianceParams& params);

// Ordered conditionals b_i | b_N(i) ~ N(A_i b_N(i), D_i). Rows are ordered
// positions; neighbor entries refer to ordered positions as well.
struct VecchiaStructure {
  std::vector<int> order;
  NeighborSets neighbors;
  std::vector<Eigen::VectorXd> coef;
  Eigen::VectorXd cond_var;
  int m = 0;

  // Filled only when built with gradients: per row |N(i)| x n_params and
  // n x n_params, derivatives in log-parameter space.
  std::vector<Eigen::MatrixXd> coef_grad;
  Eigen::MatrixXd cond_var_grad;

  Eigen::Index size() const { return static_cast<Eigen::Index>(order.size()); }

  // r_i = b[order[i]] - A_i b[order[N(i)]], b in point indexing.
  Eigen::VectorXd residual(const Eigen::VectorXd& b) const;

  // Unit-diagonal factor B = I - A with rows in ordered positions and
  // columns in point indexing; Q = B^T diag(1/D) B.
  Eigen::SparseMatrix<double> factor_matrix() const;
  Eigen::SparseMatrix<double> precision() const;

  // log det Q = -sum log D_i
  double log_det_precision() const;
};

VecchiaStructure build_factor(std::span<const SpaceTimePoint> points, std::vector<int> order,
                              NeighborSets neighbors, const CovarianceParams& params,
                              bool with_gradient = false, double jitter = kDefaultJitter);

double latent_log_density(const Eigen::VectorXd& b, const VecchiaStructure& structure);

// True when iteration is a power of two.
bool refresh_schedule(long iteration);

}  // namespace frailty
