#include "frailty/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frailty/error.hpp"

namespace frailty {

namespace {

void check_inputs(std::span<const double> probs, std::span<const int> labels, bool need_both) {
  if (probs.size() != labels.size()) throw ValidationError("probabilities and labels differ in length");
  if (probs.empty()) throw ValidationError("no observations to score");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (need_both && (pos == 0 || pos == labels.size())) {
    throw ValidationError("both classes must be present");
  }
}

std::vector<std::size_t> sorted_index(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

// Beta(a, b) severity density and integrals of linear functions against it.
struct BetaWeight {
  double a, b, norm;
  BetaWeight(double a_, double b_)
      : a(a_), b(b_), norm(std::exp(std::lgamma(a_ + b_) - std::lgamma(a_) - std::lgamma(b_))) {}
  double density(double c) const {
    if (c <= 0.0 || c >= 1.0) return 0.0;
    return norm * std::pow(c, a - 1.0) * std::pow(1.0 - c, b - 1.0);
  }
  // Integral of (m0 + m1 c) density(c) over [lo, hi].
  double integrate_linear(double m0, double m1, double lo, double hi) const {
    if (hi <= lo) return 0.0;
    if (a == 2.0 && b == 2.0) {
      // density 6c(1-c): antiderivatives of 6c - 6c^2 and 6c^2 - 6c^3
      auto p0 = [](double c) { return 3.0 * c * c - 2.0 * c * c * c; };
      auto p1 = [](double c) { return 2.0 * c * c * c - 1.5 * c * c * c * c; };
      return m0 * (p0(hi) - p0(lo)) + m1 * (p1(hi) - p1(lo));
    }
    // Composite Gauss-Legendre on a fine partition for other shapes.
    static const double x5[] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                0.5384693101056831, 0.9061798459386640};
    static const double w5[] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                0.4786286704993665, 0.2369268850561891};
    const int pieces = 200;
    const double h = (hi - lo) / pieces;
    double s = 0.0;
    for (int k = 0; k < pieces; ++k) {
      const double mid = lo + (k + 0.5) * h;
      for (int q = 0; q < 5; ++q) {
        const double c = mid + 0.5 * h * x5[q];
        s += 0.5 * h * w5[q] * (m0 + m1 * c) * density(c);
      }
    }
    return s;
  }
};

}  // namespace

double auc(std::span<const double> probs, std::span<const int> labels) {
  check_inputs(probs, labels, true);
  const auto idx = sorted_index(probs);
  const std::size_t n = idx.size();
  double rank_sum = 0.0;
  double n1 = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && probs[idx[j]] == probs[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) {
        rank_sum += avg_rank;
        n1 += 1.0;
      }
    }
    i = j;
  }
  const double n0 = static_cast<double>(n) - n1;
  return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1);
}

double h_measure(std::span<const double> probs, std::span<const int> labels, double a, double b) {
  check_inputs(probs, labels, true);
  if (!(a > 0.0 && b > 0.0)) throw ValidationError("H-measure: beta parameters must be positive");
  const auto idx = sorted_index(probs);
  const std::size_t n = idx.size();
  double n1 = 0.0;
  for (int y : labels) n1 += y;
  const double n0 = static_cast<double>(n) - n1;
  const double pi0 = n0 / static_cast<double>(n), pi1 = n1 / static_cast<double>(n);

  // ROC points (F0(t), F1(t)) for t below all scores and after every tie block.
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  double c0 = 0.0, c1 = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && probs[idx[j]] == probs[idx[i]]) {
      (labels[idx[j]] == 1 ? c1 : c0) += 1.0;
      ++j;
    }
    pts.emplace_back(c0 / n0, c1 / n1);
    i = j;
  }
  // Each point gives a line in c: intercept pi1*F1, slope pi0*(1-F0) - pi1*F1.
  struct Line {
    double slope, intercept;
  };
  std::vector<Line> lines;
  lines.reserve(pts.size());
  for (const auto& [f0, f1] : pts) lines.push_back({pi0 * (1.0 - f0) - pi1 * f1, pi1 * f1});
  std::sort(lines.begin(), lines.end(), [](const Line& l, const Line& r) {
    return l.slope > r.slope || (l.slope == r.slope && l.intercept < r.intercept);
  });
  // Lower envelope over c in [0, 1]; slopes decrease along the envelope.
  std::vector<Line> hull;
  auto cross = [](const Line& l, const Line& r) {
    return (r.intercept - l.intercept) / (l.slope - r.slope);
  };
  for (const Line& l : lines) {
    if (!hull.empty() && hull.back().slope == l.slope) continue;
    while (hull.size() >= 2 &&
           cross(hull[hull.size() - 2], l) <= cross(hull[hull.size() - 2], hull.back())) {
      hull.pop_back();
    }
    hull.push_back(l);
  }
  const BetaWeight w(a, b);
  double loss = 0.0;
  double lo = 0.0;
  for (std::size_t k = 0; k < hull.size() && lo < 1.0; ++k) {
    double hi = k + 1 < hull.size() ? cross(hull[k], hull[k + 1]) : 1.0;
    hi = std::clamp(hi, lo, 1.0);
    loss += w.integrate_linear(hull[k].intercept, hull[k].slope, lo, hi);
    lo = hi;
  }
  // Loss of the better trivial classifier: min(c pi0, (1 - c) pi1).
  const double l_max = w.integrate_linear(0.0, pi0, 0.0, pi1) + w.integrate_linear(pi1, -pi1, pi1, 1.0);
  return 1.0 - loss / l_max;
}

double log_loss(std::span<const double> probs, std::span<const int> labels) {
  check_inputs(probs, labels, false);
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kLogLossClamp, 1.0 - kLogLossClamp);
    s -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return s / static_cast<double>(probs.size());
}

double brier(std::span<const double> probs, std::span<const int> labels) {
  check_inputs(probs, labels, false);
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double d = probs[i] - labels[i];
    s += d * d;
  }
  return s / static_cast<double>(probs.size());
}

int BinSpec::bin_of(double p) const {
  const auto first = edges.begin() + 1, last = edges.end() - 1;
  return static_cast<int>(std::upper_bound(first, last, p) - first);
}

BinSpec quantile_bins(std::span<const double> pooled, int count) {
  if (count < 1) throw ValidationError("bin count must be positive");
  if (pooled.empty()) throw ValidationError("no predictions to build bins from");
  std::vector<double> v(pooled.begin(), pooled.end());
  std::sort(v.begin(), v.end());
  BinSpec bins;
  bins.edges.resize(count + 1);
  const double n1 = static_cast<double>(v.size() - 1);
  for (int k = 0; k <= count; ++k) {
    const double h = n1 * k / count;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    bins.edges[k] = v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  }
  bins.edges.front() = 0.0;
  bins.edges.back() = 1.0;
  return bins;
}

double ece(std::span<const double> probs, std::span<const int> labels, const BinSpec& bins) {
  check_inputs(probs, labels, false);
  if (bins.count() < 1) throw ValidationError("ECE needs at least one bin");
  std::vector<double> sum_p(bins.count(), 0.0), sum_y(bins.count(), 0.0), cnt(bins.count(), 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int k = bins.bin_of(probs[i]);
    sum_p[k] += probs[i];
    sum_y[k] += labels[i];
    cnt[k] += 1.0;
  }
  double s = 0.0;
  for (int k = 0; k < bins.count(); ++k) {
    if (cnt[k] > 0.0) s += std::abs(sum_p[k] - sum_y[k]);
  }
  return s / static_cast<double>(probs.size());
}

double crps_empirical(std::span<const double> samples, double realized) {
  if (samples.empty()) throw ValidationError("CRPS needs at least one sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double abs_err = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    abs_err += std::abs(x[i] - realized);
    spread += x[i] * (2.0 * static_cast<double>(i) + 1.0 - n);
  }
  // sum_{i,j} |x_i - x_j| = 2 * spread
  return abs_err / n - spread / (n * n);
}

double quantile_loss(double q, double realized, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  return (realized - q) * (alpha - (realized <= q ? 1.0 : 0.0));
}

double rmse(std::span<const double> predicted, std::span<const double> realized) {
  if (predicted.size() != realized.size()) throw ValidationError("rmse: length mismatch");
  if (predicted.empty()) throw ValidationError("rmse: no values");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - realized[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(predicted.size()));
}

}  // namespace frailty
