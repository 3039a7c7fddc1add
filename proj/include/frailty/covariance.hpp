#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace frailty {

enum class CovarianceMode { spatial, spacetime };

enum class Smoothness { half, three_halves, five_halves };

double smoothness_value(Smoothness nu);
Smoothness smoothness_from_value(double nu);

// Matérn parameters. rho_t is present iff the process is spatio-temporal.
struct CovarianceParams {
  double sigma2 = 1.0;
  double rho_s = 1.0;
  std::optional<double> rho_t;
  Smoothness nu = Smoothness::three_halves;

  CovarianceMode mode() const {
    return rho_t ? CovarianceMode::spacetime : CovarianceMode::spatial;
  }
  // Number of estimated parameters (sigma2, rho_s[, rho_t]).
  int size() const { return rho_t ? 3 : 2; }
  void validate() const;
};

struct SpaceTimePoint {
  double t = 0.0;
  double x = 0.0;  // longitude
  double y = 0.0;  // latitude

  friend bool operator==(const SpaceTimePoint&, const SpaceTimePoint&) = default;
};

// Unit-variance correlation g_nu(d) for a range-scaled distance d >= 0.
double matern_correlation(double d, Smoothness nu);

// g'(d)/d, finite at d = 0 for nu >= 3/2 (and set to 0 at d = 0 for nu = 1/2).
double matern_slope_over_distance(double d, Smoothness nu);

// sigma2 * g_nu(d). Throws on negative d.
double matern(double d, const CovarianceParams& params);

// ||A^{-1}(p - q)|| with A = diag(rho_t, rho_s, rho_s); spatial mode ignores time.
double scaled_distance(const SpaceTimePoint& p, const SpaceTimePoint& q,
                       const CovarianceParams& params, CovarianceMode mode);

// Squared scaled components (time, space) of the distance above.
struct ScaledComponents {
  double dt2 = 0.0;
  double ds2 = 0.0;
  double distance() const;
};
ScaledComponents scaled_components(const SpaceTimePoint& p, const SpaceTimePoint& q,
                                   const CovarianceParams& params);

inline constexpr double kDefaultJitter = 1e-10;

// Dense covariance with jitter * sigma2 added to the diagonal.
Eigen::MatrixXd cov_matrix(std::span<const SpaceTimePoint> points,
                           const CovarianceParams& params,
                           double jitter = kDefaultJitter);

// Covariance between p and q including the diagonal jitter when same_index.
double covariance(const SpaceTimePoint& p, const SpaceTimePoint& q,
                  const CovarianceParams& params, bool same_index,
                  double jitter = kDefaultJitter);

// Derivatives of covariance(p, q) with respect to (log sigma2, log rho_s[, log rho_t]).
void covariance_gradient(const SpaceTimePoint& p, const SpaceTimePoint& q,
                         const CovarianceParams& params, bool same_index, double jitter,
                         std::span<double> out);

Eigen::VectorXd to_log_scale(const CovarianceParams& params);
CovarianceParams from_log_scale(const Eigen::VectorXd& v, Smoothness nu = Smoothness::three_halves);

}  // namespace frailty
