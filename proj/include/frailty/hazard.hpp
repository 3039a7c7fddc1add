#pragma once

#include <span>

#include <Eigen/Dense>

namespace frailty {

// Probability clamp applied inside log terms only.
inline constexpr double kProbClamp = 1e-15;

// Logistic link, evaluated symmetrically so that link(-x) == 1 - link(x).
double link(double eta);

double logit(double p);

// Log-likelihood of one Bernoulli observation with logit link and its first
// two derivatives in eta.
struct ObsLogLik {
  double value = 0.0;
  double d1 = 0.0;  // y - p
  double d2 = 0.0;  // -p(1-p)
};
ObsLogLik obs_loglik(double eta, int y);

// d/deta of p(1-p), i.e. minus the third derivative of the log-likelihood.
double curvature_slope(double eta);

// Negative log of the factorized independent likelihood with F = X beta.
struct NegLogLik {
  double value = 0.0;
  Eigen::VectorXd gradient;
};
NegLogLik independent_negloglik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& design,
                                std::span<const int> y);

}  // namespace frailty
