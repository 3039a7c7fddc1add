#include "frailty/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "frailty/error.hpp"
#include "frailty/hazard.hpp"
#include "frailty/prediction.hpp"
#include "frailty/rng.hpp"

namespace frailty {

namespace {

void check_sims(int n_sims) {
  if (n_sims < 1) throw ValidationError("n_sims must be at least 1");
}

// Runs body(r) for r in [0, n), split into contiguous blocks.
void parallel_runs(int n, int threads, const std::function<void(int)>& body) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int r = 0; r < n; ++r) body(r);
    return;
  }
  std::vector<std::thread> pool;
  const int block = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * block, hi = std::min(n, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] {
      for (int r = lo; r < hi; ++r) body(r);
    });
  }
  for (auto& th : pool) th.join();
}

// Lower Cholesky factor of a PSD matrix, adding diagonal jitter if needed.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double scale = std::max(1e-300, cov.diagonal().maxCoeff());
  for (double eps = 1e-12; eps <= 1e-4; eps *= 10.0) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += eps * scale;
    llt.compute(c);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericalError("latent predictive covariance is not positive semidefinite");
}

}  // namespace

LossDistribution simulate_latent_losses(std::span<const double> fixed,
                                        std::span<const double> balances,
                                        std::span<const int> latent_of,
                                        const Eigen::VectorXd& latent_mean,
                                        const Eigen::MatrixXd& latent_cov, int n_sims,
                                        std::uint64_t seed, int threads) {
  check_sims(n_sims);
  if (fixed.size() != balances.size() || fixed.size() != latent_of.size()) {
    throw ValidationError("portfolio: fixed effects, balances and latent keys differ in length");
  }
  const Eigen::Index k = latent_mean.size();
  if (latent_cov.rows() != k || latent_cov.cols() != k) {
    throw ValidationError("portfolio: latent covariance has the wrong shape");
  }
  const Eigen::MatrixXd L = psd_factor(latent_cov);
  LossDistribution dist;
  dist.seed = seed;
  dist.samples.assign(n_sims, 0.0);
  parallel_runs(n_sims, threads, [&](int r) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(r));
    Eigen::VectorXd z(k);
    for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
    const Eigen::VectorXd b = latent_mean + L.triangularView<Eigen::Lower>() * z;
    double loss = 0.0;
    for (std::size_t i = 0; i < fixed.size(); ++i) {
      if (rng.uniform_open() < link(fixed[i] + b[latent_of[i]])) loss += balances[i];
    }
    dist.samples[r] = loss;
  });
  return dist;
}

LossDistribution simulate_independent_losses(std::span<const double> probs,
                                             std::span<const double> balances, int n_sims,
                                             std::uint64_t seed, int threads) {
  check_sims(n_sims);
  if (probs.size() != balances.size()) {
    throw ValidationError("portfolio: probabilities and balances differ in length");
  }
  LossDistribution dist;
  dist.seed = seed;
  dist.samples.assign(n_sims, 0.0);
  parallel_runs(n_sims, threads, [&](int r) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(r));
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (rng.uniform_open() < probs[i]) loss += balances[i];
    }
    dist.samples[r] = loss;
  });
  return dist;
}

LossDistribution simulate_losses(const FittedModel& model, const PanelDataset& panel, int n_sims,
                                 std::uint64_t seed, int threads) {
  check_sims(n_sims);
  const Eigen::VectorXd bal = panel.balances();
  const std::span<const double> balances(bal.data(), static_cast<std::size_t>(bal.size()));
  const Eigen::VectorXd F = model.fixed_effects(panel);
  const std::span<const double> fixed(F.data(), static_cast<std::size_t>(F.size()));
  if (!model.latent) {
    std::vector<double> probs(fixed.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = link(fixed[i]);
    return simulate_independent_losses(probs, balances, n_sims, seed, threads);
  }
  const LatentIndex index = prediction_index(model, panel);
  const LatentPredictive pred = latent_predict(*model.latent, index.points, true);
  return simulate_latent_losses(fixed, balances, index.obs_to_latent, pred.joint_mean,
                                pred.joint_cov, n_sims, seed, threads);
}

double order_statistic_quantile(std::span<const double> samples, double alpha) {
  if (samples.empty()) throw ValidationError("quantile of an empty sample");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("quantile level must lie in (0, 1]");
  std::vector<double> v(samples.begin(), samples.end());
  const auto n = static_cast<double>(v.size());
  auto k = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9 * n));
  k = std::clamp<std::size_t>(k, 1, v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

LossSummary summarize(const LossDistribution& dist) {
  if (dist.samples.empty()) throw ValidationError("summary of an empty loss distribution");
  LossSummary s;
  double sum = 0.0;
  for (double x : dist.samples) sum += x;
  s.n_sims = dist.samples.size();
  s.mean = sum / static_cast<double>(s.n_sims);
  s.q99 = order_statistic_quantile(dist.samples, 0.99);
  s.seed = dist.seed;
  return s;
}

std::string format_loss_samples(const LossDistribution& dist) {
  std::string out = "loss\n";
  for (double x : dist.samples) out += format_number(x) + "\n";
  return out;
}

std::string format_loss_summary(const LossSummary& s) {
  return "mean,q99,n_sims,seed\n" + format_number(s.mean) + "," + format_number(s.q99) + "," +
         std::to_string(s.n_sims) + "," + std::to_string(s.seed) + "\n";
}

}  // namespace frailty
