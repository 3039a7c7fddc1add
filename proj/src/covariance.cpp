#include "frailty/covariance.hpp"

#include <cmath>
#include <string>

#include "frailty/error.hpp"

namespace frailty {

namespace {
const double kSqrt3 = std::sqrt(3.0);
const double kSqrt5 = std::sqrt(5.0);
}  // namespace

double smoothness_value(Smoothness nu) {
  switch (nu) {
    case Smoothness::half: return 0.5;
    case Smoothness::three_halves: return 1.5;
    case Smoothness::five_halves: return 2.5;
  }
  return 1.5;
}

Smoothness smoothness_from_value(double nu) {
  if (nu == 0.5) return Smoothness::half;
  if (nu == 1.5) return Smoothness::three_halves;
  if (nu == 2.5) return Smoothness::five_halves;
  throw ValidationError("smoothness must be one of 0.5, 1.5, 2.5, got " + std::to_string(nu));
}

void CovarianceParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(sigma2)) throw ValidationError("sigma2 must be positive and finite");
  if (!positive(rho_s)) throw ValidationError("rho_s must be positive and finite");
  if (rho_t && !positive(*rho_t)) throw ValidationError("rho_t must be positive and finite");
}

double matern_correlation(double d, Smoothness nu) {
  switch (nu) {
    case Smoothness::half:
      return std::exp(-d);
    case Smoothness::three_halves:
      return (1.0 + kSqrt3 * d) * std::exp(-kSqrt3 * d);
    case Smoothness::five_halves:
      return (1.0 + kSqrt5 * d + 5.0 * d * d / 3.0) * std::exp(-kSqrt5 * d);
  }
  return 0.0;
}

double matern_slope_over_distance(double d, Smoothness nu) {
  switch (nu) {
    case Smoothness::half:
      return d > 0.0 ? -std::exp(-d) / d : 0.0;
    case Smoothness::three_halves:
      return -3.0 * std::exp(-kSqrt3 * d);
    case Smoothness::five_halves:
      return -(5.0 / 3.0) * (1.0 + kSqrt5 * d) * std::exp(-kSqrt5 * d);
  }
  return 0.0;
}

double matern(double d, const CovarianceParams& params) {
  if (!(d >= 0.0)) throw ValidationError("scaled distance must be nonnegative");
  return params.sigma2 * matern_correlation(d, params.nu);
}

double ScaledComponents::distance() const { return std::sqrt(dt2 + ds2); }

ScaledComponents scaled_components(const SpaceTimePoint& p, const SpaceTimePoint& q,
                                   const CovarianceParams& params) {
  ScaledComponents c;
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  c.ds2 = (dx * dx + dy * dy) / (params.rho_s * params.rho_s);
  if (params.rho_t) {
    const double dt = (p.t - q.t) / *params.rho_t;
    c.dt2 = dt * dt;
  }
  return c;
}

double scaled_distance(const SpaceTimePoint& p, const SpaceTimePoint& q,
                       const CovarianceParams& params, CovarianceMode mode) {
  if (mode != params.mode()) {
    throw ValidationError("covariance mode does not match the presence of rho_t");
  }
  return scaled_components(p, q, params).distance();
}

double covariance(const SpaceTimePoint& p, const SpaceTimePoint& q,
                  const CovarianceParams& params, bool same_index, double jitter) {
  const double c = params.sigma2 * matern_correlation(scaled_components(p, q, params).distance(),
                                                      params.nu);
  return same_index ? c + jitter * params.sigma2 : c;
}

void covariance_gradient(const SpaceTimePoint& p, const SpaceTimePoint& q,
                         const CovarianceParams& params, bool same_index, double jitter,
                         std::span<double> out) {
  const ScaledComponents sc = scaled_components(p, q, params);
  const double d = sc.distance();
  out[0] = params.sigma2 * matern_correlation(d, params.nu) + (same_index ? jitter * params.sigma2 : 0.0);
  // dc/dlog(rho) = sigma2 * g'(d) * dd/dlog(rho) with dd/dlog(rho) = -component / d.
  const double h = params.sigma2 * matern_slope_over_distance(d, params.nu);
  out[1] = -h * sc.ds2;
  if (params.rho_t) out[2] = -h * sc.dt2;
}

Eigen::MatrixXd cov_matrix(std::span<const SpaceTimePoint> points,
                           const CovarianceParams& params, double jitter) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma(i, i) = covariance(points[i], points[i], params, true, jitter);
    for (Eigen::Index j = 0; j < i; ++j) {
      sigma(i, j) = sigma(j, i) = covariance(points[i], points[j], params, false);
    }
  }
  return sigma;
}

Eigen::VectorXd to_log_scale(const CovarianceParams& params) {
  params.validate();
  Eigen::VectorXd v(params.size());
  v[0] = std::log(params.sigma2);
  v[1] = std::log(params.rho_s);
  if (params.rho_t) v[2] = std::log(*params.rho_t);
  return v;
}

CovarianceParams from_log_scale(const Eigen::VectorXd& v, Smoothness nu) {
  if (v.size() != 2 && v.size() != 3) {
    throw ValidationError("log-parameter vector must have 2 or 3 entries");
  }
  if (!v.allFinite()) throw ValidationError("log-parameter vector must be finite");
  CovarianceParams p;
  p.nu = nu;
  p.sigma2 = std::exp(v[0]);
  p.rho_s = std::exp(v[1]);
  if (v.size() == 3) p.rho_t = std::exp(v[2]);
  p.validate();
  return p;
}

}  // namespace frailty
