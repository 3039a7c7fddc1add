#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "frailty/covariance.hpp"
#include "frailty/error.hpp"
#include "frailty/panel.hpp"
#include "frailty/sparse_factor.hpp"
#include "frailty/vecchia.hpp"

namespace frailty {

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

struct LaplaceState {
  Eigen::VectorXd mode;  // b-hat, point indexing
  Eigen::VectorXd W;     // per latent point sum of p(1-p)
  double objective = 0.0;  // log p(y | b-hat) + log p(b-hat) without the 2 pi constant
  bool converged = false;
  int iterations = 0;
};

// Mode finding failed to converge; carries the last iterate.
class ModeError : public NumericalError {
 public:
  ModeError(const std::string& what, LaplaceState state)
      : NumericalError(what), state_(std::move(state)) {}
  const LaplaceState& state() const { return state_; }

 private:
  LaplaceState state_;
};

// Newton mode of sum_j log L(F_j + b_z(j)) - b^T Q b / 2. On success the
// factor holds Q + W at the mode.
LaplaceState find_mode(std::span<const double> F, const VecchiaStructure& structure,
                       const Eigen::SparseMatrix<double>& precision, const LatentIndex& incidence,
                       std::span<const int> y, SparseSpdFactor& factor,
                       const Eigen::VectorXd* warm_start = nullptr,
                       const NewtonOptions& options = {});

enum class OptimizerMethod { lbfgs, nesterov };

struct OptimizerOptions {
  OptimizerMethod method = OptimizerMethod::lbfgs;
  int budget = 100;             // optimizer iterations
  double rel_tol = 1e-9;        // relative objective change
  double grad_tol = 1e-6;       // sup-norm of the log-space gradient, relative to max(1, |obj|)
  double max_step = 1.0;        // sup-norm cap of a log-space step
  double min_log_sigma2 = std::log(1e-8);
  double momentum = 0.5;        // Nesterov
  bool fix_sigma2 = false;      // hold sigma2 at its current value
  bool fix_all = false;         // no optimization at all
};

struct OptimizeResult {
  CovarianceParams theta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool budget_exhausted = false;  // warning flag
};

// Laplace-approximated marginal likelihood for binary data with a Vecchia
// latent Gaussian process. Holds the latent geometry, the ordering and the
// neighbor sets; neighbor sets change only through refresh_neighbors().
class LatentGaussianModel {
 public:
  struct Config {
    CovarianceMode mode = CovarianceMode::spacetime;
    Smoothness nu = Smoothness::three_halves;
    int num_neighbors = 20;
    std::uint64_t ordering_seed = 1;
    double jitter = kDefaultJitter;
    NewtonOptions newton;
  };

  LatentGaussianModel(LatentIndex incidence, std::vector<int> y, Config config,
                      const CovarianceParams& theta_for_neighbors);

  // Reuse a stored ordering and neighbor sets (model deserialization).
  LatentGaussianModel(LatentIndex incidence, std::vector<int> y, Config config,
                      std::vector<int> order, NeighborSets neighbors);

  struct Evaluation {
    LaplaceState state;
    double objective = 0.0;  // log L-tilde
    double log_det_precision = 0.0;
    double log_det_posterior = 0.0;
    Eigen::VectorXd grad_F;      // empty unless requested
    Eigen::VectorXd grad_theta;  // log-space, empty unless requested
  };

  Evaluation evaluate(std::span<const double> F, const CovarianceParams& theta, bool want_grad_F,
                      bool want_grad_theta);

  // Convenience wrappers.
  double marginal_loglik(std::span<const double> F, const CovarianceParams& theta);
  Eigen::VectorXd grad_F(std::span<const double> F, const CovarianceParams& theta);
  Eigen::VectorXd grad_theta(std::span<const double> F, const CovarianceParams& theta);

  OptimizeResult optimize_theta(std::span<const double> F, const CovarianceParams& theta0,
                                const OptimizerOptions& options);

  // Recompute neighbor sets under the correlation metric (spacetime) or the
  // euclidean metric (spatial). Returns true if any set changed.
  bool refresh_neighbors(const CovarianceParams& theta);

  // Total optimizer iterations; refreshes happen when this is a power of two.
  long optimizer_iterations() const { return optimizer_iterations_; }

  const LatentIndex& incidence() const { return incidence_; }
  std::span<const int> labels() const { return y_; }
  const Config& config() const { return config_; }
  const std::vector<int>& order() const { return order_; }
  const NeighborSets& neighbors() const { return neighbors_; }
  NeighborMetric metric() const;

  VecchiaStructure structure(const CovarianceParams& theta, bool with_gradient) const;

  // Factor of Q + W from the most recent evaluate().
  const SparseSpdFactor& posterior_factor() const { return factor_; }
  const std::optional<LaplaceState>& last_state() const { return last_state_; }

 private:
  LatentIndex incidence_;
  std::vector<int> y_;
  Config config_;
  std::vector<int> order_;
  NeighborSets neighbors_;
  SparseSpdFactor factor_;
  Eigen::Index factor_nnz_ = -1;
  std::optional<LaplaceState> last_state_;
  long optimizer_iterations_ = 0;
};

}  // namespace frailty
