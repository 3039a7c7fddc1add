#include "frailty/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frailty/error.hpp"

namespace frailty {

double link(double eta) {
  // Kept strictly inside (0, 1) for any finite input.
  constexpr double kUpper = 1.0 - 0x1.0p-53;
  constexpr double kLower = std::numeric_limits<double>::min();
  if (eta >= 0.0) return std::min(1.0 / (1.0 + std::exp(-eta)), kUpper);
  const double e = std::exp(eta);
  return std::max(e / (1.0 + e), kLower);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

namespace {
// log(1 + exp(x)) without overflow
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
}  // namespace

ObsLogLik obs_loglik(double eta, int y) {
  const double p = link(eta);
  ObsLogLik out;
  // log p = -softplus(-eta), log(1-p) = -softplus(eta)
  const double log_p = std::max(-softplus(-eta), std::log(kProbClamp));
  const double log_q = std::max(-softplus(eta), std::log(kProbClamp));
  out.value = y == 1 ? log_p : log_q;
  out.d1 = static_cast<double>(y) - p;
  out.d2 = -p * (1.0 - p);
  return out;
}

double curvature_slope(double eta) {
  const double p = link(eta);
  return p * (1.0 - p) * (1.0 - 2.0 * p);
}

NegLogLik independent_negloglik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& design,
                                std::span<const int> y) {
  if (design.cols() != beta.size() || design.rows() != static_cast<Eigen::Index>(y.size())) {
    throw ValidationError("independent_negloglik: dimension mismatch");
  }
  const Eigen::VectorXd eta = design * beta;
  NegLogLik out;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const ObsLogLik l = obs_loglik(eta[i], y[i]);
    out.value -= l.value;
    resid[i] = -l.d1;  // p - y
  }
  out.gradient = design.transpose() * resid;
  return out;
}

}  // namespace frailty
