#include "frailty/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "frailty/hazard.hpp"

namespace frailty {

namespace {

double penalized_loglik(std::span<const double> F, const Eigen::VectorXd& b,
                        const Eigen::SparseMatrix<double>& q, std::span<const int> z,
                        std::span<const int> y) {
  double s = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) s += obs_loglik(F[j] + b[z[j]], y[j]).value;
  return s - 0.5 * b.dot(q * b);
}

// Positions of the diagonal entries inside a compressed column-major matrix.
std::vector<Eigen::Index> diagonal_positions(const Eigen::SparseMatrix<double>& a) {
  std::vector<Eigen::Index> pos(a.cols(), -1);
  const int* outer = a.outerIndexPtr();
  const int* inner = a.innerIndexPtr();
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (int p = outer[c]; p < outer[c + 1]; ++p) {
      if (inner[p] == c) pos[c] = p;
    }
    if (pos[c] < 0) throw NumericalError("precision matrix lacks a diagonal entry");
  }
  return pos;
}

}  // namespace

LaplaceState find_mode(std::span<const double> F, const VecchiaStructure& structure,
                       const Eigen::SparseMatrix<double>& precision, const LatentIndex& incidence,
                       std::span<const int> y, SparseSpdFactor& factor,
                       const Eigen::VectorXd* warm_start, const NewtonOptions& options) {
  (void)structure;
  const Eigen::Index nb = precision.rows();
  const std::span<const int> z = incidence.obs_to_latent;
  if (F.size() != y.size() || z.size() != y.size()) {
    throw ValidationError("find_mode: F, y and incidence lengths differ");
  }

  Eigen::SparseMatrix<double> h = precision;
  h.makeCompressed();
  const auto diag_pos = diagonal_positions(h);
  Eigen::VectorXd q_diag(nb);
  for (Eigen::Index k = 0; k < nb; ++k) q_diag[k] = h.valuePtr()[diag_pos[k]];

  LaplaceState st;
  st.mode = (warm_start && warm_start->size() == nb) ? *warm_start : Eigen::VectorXd::Zero(nb);
  st.W.resize(nb);
  Eigen::VectorXd grad(nb);

  auto curvature_and_gradient = [&](const Eigen::VectorXd& b) {
    st.W.setZero();
    grad = -(precision * b);
    for (std::size_t j = 0; j < y.size(); ++j) {
      const ObsLogLik l = obs_loglik(F[j] + b[z[j]], y[j]);
      grad[z[j]] += l.d1;
      st.W[z[j]] -= l.d2;
    }
  };
  auto factor_posterior = [&] {
    for (Eigen::Index k = 0; k < nb; ++k) h.valuePtr()[diag_pos[k]] = q_diag[k] + st.W[k];
    factor.factorize(h);
  };

  double f = penalized_loglik(F, st.mode, precision, z, y);
  bool polish = false;
  for (int it = 1; it <= options.max_iter; ++it) {
    curvature_and_gradient(st.mode);
    if (grad.lpNorm<Eigen::Infinity>() < options.tol) {
      st.converged = true;
      break;
    }
    factor_posterior();
    const Eigen::VectorXd delta = factor.solve(grad);
    double alpha = 1.0;
    Eigen::VectorXd trial = st.mode + delta;
    double f_new = penalized_loglik(F, trial, precision, z, y);
    for (int h_it = 0; h_it < 40 && !(f_new >= f); ++h_it) {
      alpha *= 0.5;
      trial = st.mode + alpha * delta;
      f_new = penalized_loglik(F, trial, precision, z, y);
    }
    st.iterations = it;
    if (!(f_new >= f)) {
      // No ascent possible along the Newton direction: at the mode up to rounding.
      st.converged = grad.dot(delta) < 1e-10 * std::max(1.0, std::abs(f));
      break;
    }
    const double rel = (f_new - f) / std::max(1.0, std::abs(f));
    st.mode = std::move(trial);
    f = f_new;
    if (polish) {
      st.converged = true;
      break;
    }
    // One extra full step after the relative-change test fires.
    if (rel < options.tol) polish = true;
  }
  st.objective = f;
  curvature_and_gradient(st.mode);
  if (!st.converged) {
    throw ModeError("Laplace mode finding did not converge after " +
                        std::to_string(st.iterations) + " iterations",
                    st);
  }
  factor_posterior();
  return st;
}

// ---------------------------------------------------------------- model

LatentGaussianModel::LatentGaussianModel(LatentIndex incidence, std::vector<int> y, Config config,
                                         const CovarianceParams& theta_for_neighbors)
    : incidence_(std::move(incidence)), y_(std::move(y)), config_(config) {
  if (incidence_.obs_to_latent.size() != y_.size()) {
    throw ValidationError("latent model: incidence and labels differ in length");
  }
  if (incidence_.points.empty()) throw ValidationError("latent model: no latent points");
  const auto strategy = config_.mode == CovarianceMode::spacetime
                            ? OrderingStrategy::time_then_random
                            : OrderingStrategy::random;
  order_ = order_points(incidence_.points, strategy, config_.ordering_seed);
  neighbors_ = select_neighbors(incidence_.points, order_, config_.num_neighbors, metric(),
                                theta_for_neighbors);
}

LatentGaussianModel::LatentGaussianModel(LatentIndex incidence, std::vector<int> y, Config config,
                                         std::vector<int> order, NeighborSets neighbors)
    : incidence_(std::move(incidence)),
      y_(std::move(y)),
      config_(config),
      order_(std::move(order)),
      neighbors_(std::move(neighbors)) {
  if (order_.size() != incidence_.points.size() || neighbors_.size() != order_.size()) {
    throw ValidationError("latent model: stored ordering does not match the latent points");
  }
}

NeighborMetric LatentGaussianModel::metric() const {
  return config_.mode == CovarianceMode::spacetime ? NeighborMetric::correlation
                                                   : NeighborMetric::euclidean;
}

bool LatentGaussianModel::refresh_neighbors(const CovarianceParams& theta) {
  if (metric() == NeighborMetric::euclidean) return false;
  NeighborSets fresh =
      select_neighbors(incidence_.points, order_, config_.num_neighbors, metric(), theta);
  if (fresh == neighbors_) return false;
  neighbors_ = std::move(fresh);
  factor_nnz_ = -1;
  factor_.reset();
  return true;
}

VecchiaStructure LatentGaussianModel::structure(const CovarianceParams& theta,
                                                bool with_gradient) const {
  if (theta.mode() != config_.mode) {
    throw ValidationError("covariance parameters do not match the latent model mode");
  }
  return build_factor(incidence_.points, order_, neighbors_, theta, with_gradient, config_.jitter);
}

LatentGaussianModel::Evaluation LatentGaussianModel::evaluate(std::span<const double> F,
                                                              const CovarianceParams& theta,
                                                              bool want_grad_F,
                                                              bool want_grad_theta) {
  const VecchiaStructure s = structure(theta, want_grad_theta);
  Eigen::SparseMatrix<double> q = s.precision();
  q.makeCompressed();
  if (q.nonZeros() != factor_nnz_) {
    factor_.reset();
    factor_nnz_ = q.nonZeros();
  }
  const Eigen::VectorXd* warm = last_state_ ? &last_state_->mode : nullptr;

  Evaluation ev;
  ev.state = find_mode(F, s, q, incidence_, y_, factor_, warm, config_.newton);
  last_state_ = ev.state;
  ev.log_det_precision = s.log_det_precision();
  ev.log_det_posterior = factor_.log_det();
  ev.objective = ev.state.objective + 0.5 * ev.log_det_precision - 0.5 * ev.log_det_posterior;
  if (!want_grad_F && !want_grad_theta) return ev;

  const auto& z = incidence_.obs_to_latent;
  const Eigen::VectorXd& b = ev.state.mode;
  const Eigen::Index nb = b.size();
  const SelectedInverse sigma = factor_.selected_inverse();
  const Eigen::VectorXd sdiag = sigma.diagonal();

  // u_k = dW_k / db_k; v = (Q + W)^{-1} (diag(Sigma) .* u)
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nb);
  std::vector<double> wprime(y_.size());
  for (std::size_t j = 0; j < y_.size(); ++j) {
    wprime[j] = curvature_slope(F[j] + b[z[j]]);
    u[z[j]] += wprime[j];
  }
  const Eigen::VectorXd v = factor_.solve(sdiag.cwiseProduct(u));

  if (want_grad_F) {
    ev.grad_F.resize(static_cast<Eigen::Index>(y_.size()));
    for (std::size_t j = 0; j < y_.size(); ++j) {
      const ObsLogLik l = obs_loglik(F[j] + b[z[j]], y_[j]);
      ev.grad_F[j] = l.d1 - 0.5 * sdiag[z[j]] * wprime[j] - 0.5 * l.d2 * v[z[j]];
    }
  }

  if (want_grad_theta) {
    const int np = theta.size();
    ev.grad_theta = Eigen::VectorXd::Zero(np);
    const Eigen::VectorXd r = s.residual(b);
    const Eigen::VectorXd rv = s.residual(v);
    std::vector<int> idx;
    Eigen::VectorXd bc, dbc;
    Eigen::MatrixXd sub;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const auto& nbrs = s.neighbors[i];
      const auto k = static_cast<Eigen::Index>(nbrs.size());
      idx.assign(1, s.order[i]);
      for (int p : nbrs) idx.push_back(s.order[p]);
      bc.resize(k + 1);
      bc[0] = 1.0;
      if (k > 0) bc.tail(k) = -s.coef[i];
      sub.resize(k + 1, k + 1);
      for (Eigen::Index a = 0; a <= k; ++a) {
        for (Eigen::Index c = 0; c <= a; ++c) sub(a, c) = sub(c, a) = sigma(idx[a], idx[c]);
      }
      const Eigen::VectorXd sub_bc = sub * bc;
      const double bsb = bc.dot(sub_bc);
      const double d = s.cond_var[i];
      for (int p = 0; p < np; ++p) {
        const double dd = s.cond_var_grad(i, p);
        double dbb = 0.0, dbv = 0.0, dbsb = 0.0;
        for (Eigen::Index a = 0; a < k; ++a) {
          const double da = -s.coef_grad[i](a, p);  // dB entry
          dbb += da * b[idx[a + 1]];
          dbv += da * v[idx[a + 1]];
          dbsb += da * sub_bc[a + 1];
        }
        const double t1 = -0.5 * (2.0 * dbb * r[i] / d - r[i] * r[i] * dd / (d * d));
        const double t2 = -0.5 * dd / d;
        const double t3 = -0.5 * (2.0 * dbsb / d - bsb * dd / (d * d));
        const double t4 = 0.5 * ((dbv * r[i] + rv[i] * dbb) / d - rv[i] * r[i] * dd / (d * d));
        ev.grad_theta[p] += t1 + t2 + t3 + t4;
      }
    }
  }
  return ev;
}

double LatentGaussianModel::marginal_loglik(std::span<const double> F,
                                            const CovarianceParams& theta) {
  return evaluate(F, theta, false, false).objective;
}

Eigen::VectorXd LatentGaussianModel::grad_F(std::span<const double> F,
                                            const CovarianceParams& theta) {
  return evaluate(F, theta, true, false).grad_F;
}

Eigen::VectorXd LatentGaussianModel::grad_theta(std::span<const double> F,
                                                const CovarianceParams& theta) {
  return evaluate(F, theta, false, true).grad_theta;
}

// ---------------------------------------------------------------- optimization

OptimizeResult LatentGaussianModel::optimize_theta(std::span<const double> F,
                                                   const CovarianceParams& theta0,
                                                   const OptimizerOptions& opt) {
  const Smoothness nu = theta0.nu;
  const int np = theta0.size();
  Eigen::VectorXd x = to_log_scale(theta0);
  Eigen::VectorXd free_mask = Eigen::VectorXd::Ones(np);
  if (opt.fix_sigma2) free_mask[0] = 0.0;
  if (opt.fix_all) free_mask.setZero();
  const double log_range_lo = std::log(1e-6), log_range_hi = std::log(1e6);

  auto project = [&](Eigen::VectorXd v) {
    if (free_mask[0] > 0.0) v[0] = std::max(v[0], opt.min_log_sigma2);
    for (int p = 1; p < np; ++p) v[p] = std::clamp(v[p], log_range_lo, log_range_hi);
    return v;
  };
  // Ascent direction restricted to free coordinates, zeroing components that
  // push against the sigma2 lower bound.
  auto masked = [&](const Eigen::VectorXd& x_at, Eigen::VectorXd g) {
    g = g.cwiseProduct(free_mask);
    if (free_mask[0] > 0.0 && x_at[0] <= opt.min_log_sigma2 && g[0] < 0.0) g[0] = 0.0;
    return g;
  };
  // Failed evaluations (no mode, indefinite factor) count as -inf.
  auto eval = [&](const Eigen::VectorXd& at, bool grad, Eigen::VectorXd* g) {
    try {
      Evaluation ev = evaluate(F, from_log_scale(at, nu), false, grad);
      if (grad) *g = masked(at, ev.grad_theta);
      return ev.objective;
    } catch (const NumericalError&) {
      if (grad) g->setZero();
      return -std::numeric_limits<double>::infinity();
    }
  };

  OptimizeResult res;
  Eigen::VectorXd g(np);
  if (opt.fix_all) {
    res.theta = theta0;
    res.objective = eval(x, false, nullptr);
    res.converged = true;
    return res;
  }

  double f = 0.0;
  {
    const Evaluation ev = evaluate(F, from_log_scale(x, nu), false, true);
    f = ev.objective;
    g = masked(x, ev.grad_theta);
  }
  auto cap_step = [&](Eigen::VectorXd step) {
    const double sup = step.lpNorm<Eigen::Infinity>();
    if (sup > opt.max_step) step *= opt.max_step / sup;
    return step;
  };
  auto grad_small = [&](const Eigen::VectorXd& grad, double fv) {
    return grad.lpNorm<Eigen::Infinity>() < opt.grad_tol * std::max(1.0, std::abs(fv));
  };
  auto maybe_refresh = [&]() {
    ++optimizer_iterations_;
    if (metric() == NeighborMetric::correlation && refresh_schedule(optimizer_iterations_) &&
        refresh_neighbors(from_log_scale(x, nu))) {
      f = eval(x, true, &g);
      return true;
    }
    return false;
  };

  if (opt.method == OptimizerMethod::lbfgs) {
    constexpr int kMemory = 6;
    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y) for minimizing -f
    for (int it = 1; it <= opt.budget; ++it) {
      if (maybe_refresh()) memory.clear();
      if (grad_small(g, f)) {
        res.converged = true;
        break;
      }
      // Two-loop recursion on the gradient of -f.
      Eigen::VectorXd qv = -g;
      std::vector<double> alphas(memory.size());
      for (int k = static_cast<int>(memory.size()) - 1; k >= 0; --k) {
        const auto& [sk, yk] = memory[k];
        alphas[k] = sk.dot(qv) / yk.dot(sk);
        qv -= alphas[k] * yk;
      }
      if (!memory.empty()) {
        const auto& [sk, yk] = memory.back();
        qv *= sk.dot(yk) / yk.dot(yk);
      }
      for (std::size_t k = 0; k < memory.size(); ++k) {
        const auto& [sk, yk] = memory[k];
        const double beta = yk.dot(qv) / yk.dot(sk);
        qv += (alphas[k] - beta) * sk;
      }
      Eigen::VectorXd dir = masked(x, -qv);
      if (dir.dot(g) <= 0.0) {
        dir = g;
        memory.clear();
      }
      dir = cap_step(dir);
      double step = 1.0;
      Eigen::VectorXd x_new, g_new(np);
      double f_new = -std::numeric_limits<double>::infinity();
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls) {
        x_new = project(x + step * dir);
        f_new = eval(x_new, true, &g_new);
        if (std::isfinite(f_new) && f_new >= f + 1e-4 * g.dot(x_new - x)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      res.iterations = it;
      if (!accepted) {
        evaluate(F, from_log_scale(x, nu), false, false);  // restore cached mode at x
        res.converged = true;
        break;
      }
      const Eigen::VectorXd sk = x_new - x;
      const Eigen::VectorXd yk = -(g_new - g);
      if (sk.dot(yk) > 1e-12) {
        memory.emplace_back(sk, yk);
        if (static_cast<int>(memory.size()) > kMemory) memory.pop_front();
      }
      const double rel = std::abs(f_new - f) / std::max(1.0, std::abs(f));
      x = x_new;
      f = f_new;
      g = g_new;
      if (rel < opt.rel_tol) {
        res.converged = true;
        break;
      }
    }
  } else {
    // Gradient ascent with Nesterov momentum; a step is accepted only if it
    // increases the objective, otherwise the learning rate is halved and
    // momentum restarted from the last accepted point.
    double lr = -1.0;
    Eigen::VectorXd x_prev = x;
    bool have_g = true;  // g holds the gradient at x
    auto gradient_at_x = [&] {
      if (!have_g) {
        f = eval(x, true, &g);
        have_g = true;
      }
      return g;
    };
    for (int it = 1; it <= opt.budget; ++it) {
      if (maybe_refresh()) {
        x_prev = x;
        have_g = true;
      }
      Eigen::VectorXd y_pt = project(x + opt.momentum * (x - x_prev));
      Eigen::VectorXd gy(np);
      if (y_pt == x) {
        gy = gradient_at_x();
      } else if (!std::isfinite(eval(y_pt, true, &gy))) {
        y_pt = x;
        gy = gradient_at_x();
      }
      if (y_pt == x && grad_small(gy, f)) {
        res.converged = true;
        break;
      }
      if (lr < 0.0) lr = 0.5 / std::max(gy.lpNorm<Eigen::Infinity>(), 1e-12);
      bool accepted = false;
      Eigen::VectorXd x_new;
      double f_new = f;
      for (int h = 0; h < 20; ++h) {
        x_new = project(y_pt + cap_step(lr * gy));
        f_new = eval(x_new, false, nullptr);
        if (std::isfinite(f_new) && f_new > f) {
          accepted = true;
          break;
        }
        lr *= 0.5;
        if (!(y_pt == x)) {
          y_pt = x;
          gy = gradient_at_x();
        }
      }
      res.iterations = it;
      if (!accepted) {
        evaluate(F, from_log_scale(x, nu), false, false);
        res.converged = true;
        break;
      }
      const double rel = (f_new - f) / std::max(1.0, std::abs(f));
      x_prev = x;
      x = x_new;
      f = f_new;
      have_g = false;
      if (rel < opt.rel_tol) {
        res.converged = true;
        break;
      }
    }
  }
  res.theta = from_log_scale(x, nu);
  res.objective = f;
  res.budget_exhausted = !res.converged;
  return res;
}

}  // namespace frailty
