#pragma once

#include <span>
#include <vector>

namespace frailty {

// Mann-Whitney statistic: P(score of a default > score of a non-default),
// ties counted one half. Throws unless both classes are present.
double auc(std::span<const double> probs, std::span<const int> labels);

// Hand's H-measure with a Beta(a, b) severity distribution. Defaults (label
// 1) are the positive class and higher scores predict defaults. The cost c is
// the weight on misclassified non-defaults; the loss at a threshold is
//   c * pi0 * (1 - F0(t)) + (1 - c) * pi1 * F1(t),
// minimized over thresholds and integrated against the severity density.
double h_measure(std::span<const double> probs, std::span<const int> labels, double a = 2.0,
                 double b = 2.0);

inline constexpr double kLogLossClamp = 1e-15;

double log_loss(std::span<const double> probs, std::span<const int> labels);
double brier(std::span<const double> probs, std::span<const int> labels);

// Bin edges; edges.front() == 0 and edges.back() == 1. Bin k holds
// edges[k] <= p < edges[k + 1], the last bin also holds p == 1.
struct BinSpec {
  std::vector<double> edges;
  int count() const { return static_cast<int>(edges.size()) - 1; }
  int bin_of(double p) const;
};

// Equally spaced quantiles (linear interpolation) of the pooled predictions.
BinSpec quantile_bins(std::span<const double> pooled, int count = 20);

double ece(std::span<const double> probs, std::span<const int> labels, const BinSpec& bins);

// mean |X - L| - mean |X - X'| / 2 over all ordered sample pairs.
double crps_empirical(std::span<const double> samples, double realized);

// Pinball loss (L - q)(alpha - 1{L <= q}).
double quantile_loss(double q, double realized, double alpha = 0.99);

double rmse(std::span<const double> predicted, std::span<const double> realized);

}  // namespace frailty
