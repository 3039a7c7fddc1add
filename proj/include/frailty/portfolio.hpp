#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "frailty/model.hpp"

namespace frailty {

struct LossDistribution {
  std::vector<double> samples;
  std::uint64_t seed = 0;
  std::optional<double> realized_loss;
};

struct LossSummary {
  double mean = 0.0;
  double q99 = 0.0;
  std::size_t n_sims = 0;
  std::uint64_t seed = 0;
};

inline constexpr int kDefaultSimulations = 100000;

// Two-step simulation: one joint latent draw per run, then conditionally
// independent Bernoulli defaults. Run r uses Rng::stream(seed, r), so the
// result does not depend on the thread count.
LossDistribution simulate_losses(const FittedModel& model, const PanelDataset& panel,
                                 int n_sims = kDefaultSimulations, std::uint64_t seed = 1,
                                 int threads = 1);

// Lower-level entry: fixed effects per loan, latent key per loan and the
// joint Gaussian law of the latent keys.
LossDistribution simulate_latent_losses(std::span<const double> fixed,
                                        std::span<const double> balances,
                                        std::span<const int> latent_of,
                                        const Eigen::VectorXd& latent_mean,
                                        const Eigen::MatrixXd& latent_cov, int n_sims,
                                        std::uint64_t seed, int threads = 1);

// Independent Bernoulli defaults with the given probabilities.
LossDistribution simulate_independent_losses(std::span<const double> probs,
                                             std::span<const double> balances, int n_sims,
                                             std::uint64_t seed, int threads = 1);

// Empirical quantile: order statistic at ceil(alpha * n).
double order_statistic_quantile(std::span<const double> samples, double alpha);

LossSummary summarize(const LossDistribution& dist);

std::string format_loss_samples(const LossDistribution& dist);
std::string format_loss_summary(const LossSummary& summary);

}  // namespace frailty
