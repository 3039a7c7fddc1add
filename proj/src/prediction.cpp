#include "frailty/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "frailty/error.hpp"
#include "frailty/hazard.hpp"
#include "frailty/sparse_factor.hpp"

namespace frailty {

namespace {

double metric_dist2(const SpaceTimePoint& p, const SpaceTimePoint& q, const LatentState& s) {
  if (s.config.mode == CovarianceMode::spacetime) {
    const ScaledComponents c = scaled_components(p, q, s.theta);
    return c.dt2 + c.ds2;
  }
  const double dx = p.x - q.x, dy = p.y - q.y;
  return dx * dx + dy * dy;
}

// The m candidates closest to p; candidates are (point, position) with ties
// going to the smaller position.
std::vector<int> nearest(const SpaceTimePoint& p, std::span<const SpaceTimePoint> candidates,
                         int m, const LatentState& s) {
  using Entry = std::pair<double, int>;
  std::vector<Entry> heap;
  heap.reserve(m + 1);
  for (int j = 0; j < static_cast<int>(candidates.size()); ++j) {
    const Entry e{metric_dist2(p, candidates[j], s), j};
    if (static_cast<int>(heap.size()) < m) {
      heap.push_back(e);
      std::push_heap(heap.begin(), heap.end());
    } else if (e < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end());
    }
  }
  std::vector<int> out;
  out.reserve(heap.size());
  for (const auto& e : heap) out.push_back(e.second);
  std::sort(out.begin(), out.end());
  return out;
}

struct Conditional {
  std::vector<int> nb;  // candidate positions
  Eigen::VectorXd A;
  double D = 0.0;
};

Conditional conditional(const SpaceTimePoint& p, std::span<const SpaceTimePoint> candidates,
                        const LatentState& s) {
  Conditional c;
  c.nb = nearest(p, candidates, s.config.num_neighbors, s);
  const auto k = static_cast<Eigen::Index>(c.nb.size());
  const double jitter = s.config.jitter;
  const double c_pp = covariance(p, p, s.theta, true, jitter);
  if (k == 0) {
    c.D = c_pp;
    return c;
  }
  Eigen::MatrixXd cnn(k, k);
  Eigen::VectorXd cn(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    cn[a] = covariance(p, candidates[c.nb[a]], s.theta, false, jitter);
    for (Eigen::Index b = 0; b <= a; ++b) {
      cnn(a, b) = cnn(b, a) =
          covariance(candidates[c.nb[a]], candidates[c.nb[b]], s.theta, a == b, jitter);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cnn);
  if (llt.info() != Eigen::Success) {
    cnn.diagonal().array() += 1e-8 * s.theta.sigma2;
    llt.compute(cnn);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("prediction: neighbor covariance is not positive definite");
    }
  }
  c.A = llt.solve(cn);
  c.D = std::max(c_pp - cn.dot(c.A), 1e-14 * s.theta.sigma2);
  return c;
}

}  // namespace

LatentPredictive latent_predict(const LatentState& state, std::span<const SpaceTimePoint> points,
                                bool want_joint) {
  const auto nb = static_cast<Eigen::Index>(state.points.size());
  if (state.mode.size() != nb || state.W.size() != nb) {
    throw ValidationError("latent state: mode or curvature length differs from the latent points");
  }
  const VecchiaStructure s =
      build_factor(state.points, state.order, state.neighbors, state.theta, false,
                   state.config.jitter);
  Eigen::SparseMatrix<double> h = s.precision();
  for (Eigen::Index k = 0; k < nb; ++k) h.coeffRef(k, k) += state.W[k];
  h.makeCompressed();
  SparseSpdFactor factor;
  factor.factorize(h);

  // Training points in their Vecchia order come first.
  std::vector<SpaceTimePoint> cands;
  cands.reserve(state.points.size() + (want_joint ? points.size() : 0));
  for (int idx : state.order) cands.push_back(state.points[idx]);
  std::span<const SpaceTimePoint> train_cands(cands.data(), cands.size());

  LatentPredictive out;
  const auto np = static_cast<Eigen::Index>(points.size());
  out.mean.resize(np);
  out.var.resize(np);
  double t_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : state.points) t_max = std::max(t_max, p.t);
  std::size_t far = 0;

  auto scatter = [&](const Conditional& c, Eigen::Index count_train) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(nb);
    for (std::size_t k = 0; k < c.nb.size(); ++k) {
      if (c.nb[k] < count_train) a[state.order[c.nb[k]]] = c.A[k];
    }
    return a;
  };

  for (Eigen::Index i = 0; i < np; ++i) {
    const Conditional c = conditional(points[i], train_cands, state);
    double mu = 0.0;
    for (std::size_t k = 0; k < c.nb.size(); ++k) mu += c.A[k] * state.mode[state.order[c.nb[k]]];
    out.mean[i] = mu;
    out.var[i] = c.D + (c.nb.empty() ? 0.0 : factor.half_solve(scatter(c, nb)).squaredNorm());
    if (state.theta.rho_t && points[i].t - t_max > 10.0 * *state.theta.rho_t) ++far;
  }
  if (far > 0) {
    out.warnings.push_back(std::to_string(far) +
                           " prediction points lie more than 10 temporal ranges past the training data");
  }
  if (!want_joint) return out;

  // b_P = A_pt b_T + A_pp b_P + e, e ~ N(0, D), b_T ~ N(b-hat, (Q + W)^{-1}).
  Eigen::MatrixXd a_pp = Eigen::MatrixXd::Zero(np, np);
  Eigen::MatrixXd y(nb, np);  // half-solves of the training coefficient rows
  Eigen::VectorXd d(np), m_t(np);
  for (Eigen::Index i = 0; i < np; ++i) {
    std::span<const SpaceTimePoint> cand_i(cands.data(), cands.size());
    const Conditional c = conditional(points[i], cand_i, state);
    d[i] = c.D;
    double mu = 0.0;
    for (std::size_t k = 0; k < c.nb.size(); ++k) {
      if (c.nb[k] < nb) {
        mu += c.A[k] * state.mode[state.order[c.nb[k]]];
      } else {
        a_pp(i, c.nb[k] - nb) = c.A[k];
      }
    }
    m_t[i] = mu;
    y.col(i) = factor.half_solve(scatter(c, nb));
    cands.push_back(points[i]);
  }
  const Eigen::MatrixXd inner = y.transpose() * y + Eigen::MatrixXd(d.asDiagonal());
  const Eigen::MatrixXd i_minus = Eigen::MatrixXd::Identity(np, np) - a_pp;
  const auto tri = i_minus.triangularView<Eigen::UnitLower>();
  out.joint_mean = tri.solve(m_t);
  const Eigen::MatrixXd left = tri.solve(inner);
  out.joint_cov = tri.solve(left.transpose()).transpose();
  out.joint_cov = 0.5 * (out.joint_cov + out.joint_cov.transpose());
  return out;
}

// ---------------------------------------------------------------- quadrature

const std::pair<std::vector<double>, std::vector<double>>& gauss_hermite(int nodes) {
  if (nodes < 1 || nodes > 200) throw ValidationError("quadrature nodes must lie in [1, 200]");
  static std::mutex mutex;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(nodes);
  if (it != cache.end()) return it->second;
  // Golub-Welsch: eigen-decomposition of the Jacobi matrix of the Hermite recurrence.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> x(nodes), w(nodes);
  const double mu0 = std::sqrt(std::numbers::pi);
  for (int k = 0; k < nodes; ++k) {
    x[k] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    w[k] = mu0 * v0 * v0;
  }
  return cache.emplace(nodes, std::make_pair(std::move(x), std::move(w))).first->second;
}

namespace {

// Integral of link(w) N(w; s, v) dw, centred at the mode of the integrand.
double adaptive_gh(double s, double v, int nodes) {
  auto log_link = [](double w) { return w >= 0 ? -std::log1p(std::exp(-w)) : w - std::log1p(std::exp(w)); };
  double z = s;
  for (int it = 0; it < 100; ++it) {
    const double p = link(z);
    const double g = (1.0 - p) - (z - s) / v;
    const double h = -p * (1.0 - p) - 1.0 / v;
    const double step = g / h;
    z -= step;
    if (std::abs(step) < 1e-12 * std::max(1.0, std::abs(z))) break;
  }
  const double p = link(z);
  const double scale = 1.0 / std::sqrt(p * (1.0 - p) + 1.0 / v);
  const auto& [x, w] = gauss_hermite(nodes);
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * v);
  const double h0 = log_link(z) - 0.5 * (z - s) * (z - s) / v;
  double sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double u = z + std::numbers::sqrt2 * scale * x[k];
    const double hu = log_link(u) - 0.5 * (u - s) * (u - s) / v;
    sum += w[k] * std::exp(x[k] * x[k] + hu - h0);
  }
  return std::numbers::sqrt2 * scale * sum * std::exp(h0 + log_norm);
}

}  // namespace

double response_probability(double F, double mu, double v, int nodes) {
  if (!(v >= 0.0)) throw ValidationError("predictive variance must be nonnegative");
  const double s = F + mu;
  if (v == 0.0) return link(s);
  // Averaging with the reflected integral keeps link's symmetry exact.
  const double p = 0.5 + 0.5 * (adaptive_gh(s, v, nodes) - adaptive_gh(-s, v, nodes));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 0x1p-53);
}

// ---------------------------------------------------------------- panels

LatentIndex prediction_index(const FittedModel& model, const PanelDataset& data) {
  if (!model.latent) throw ValidationError("model has no latent process");
  return build_latent_index(data, model.latent->config.mode);
}

ProbabilityPrediction predict_default_probs(const FittedModel& model, const PanelDataset& data,
                                            int nodes, bool want_joint) {
  ProbabilityPrediction out;
  out.fixed = model.fixed_effects(data);
  const auto n = out.fixed.size();
  out.probs.resize(n);
  if (!model.latent) {
    for (Eigen::Index i = 0; i < n; ++i) out.probs[i] = link(out.fixed[i]);
    return out;
  }
  out.index = prediction_index(model, data);
  out.latent = latent_predict(*model.latent, out.index.points, want_joint);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = out.index.obs_to_latent[i];
    out.probs[i] = response_probability(out.fixed[i], out.latent.mean[k], out.latent.var[k], nodes);
  }
  return out;
}

std::vector<FrailtyMapRow> frailty_map(const FittedModel& model) {
  if (!model.latent) throw ValidationError("frailty map requires a latent process model");
  const auto& s = *model.latent;
  std::vector<std::size_t> idx(s.points.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& p = s.points[a];
    const auto& q = s.points[b];
    return std::tie(p.t, p.x, p.y) < std::tie(q.t, q.x, q.y);
  });
  std::vector<FrailtyMapRow> rows;
  rows.reserve(idx.size());
  for (std::size_t i : idx) {
    const auto& p = s.points[i];
    rows.push_back({static_cast<int>(p.t), p.x, p.y, s.mode[static_cast<Eigen::Index>(i)]});
  }
  return rows;
}

std::vector<FrailtyMapRow> frailty_map(const FittedModel& model, std::span<const int> periods,
                                       std::span<const std::pair<double, double>> locations) {
  if (!model.latent) throw ValidationError("frailty map requires a latent process model");
  const bool spacetime = model.latent->config.mode == CovarianceMode::spacetime;
  std::vector<SpaceTimePoint> pts;
  std::vector<FrailtyMapRow> rows;
  for (int t : periods) {
    for (const auto& [lon, lat] : locations) {
      pts.push_back({spacetime ? static_cast<double>(t) : 0.0, lon, lat});
      rows.push_back({t, lon, lat, 0.0});
    }
  }
  if (pts.empty()) return rows;
  const LatentPredictive pred = latent_predict(*model.latent, pts, false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].posterior_mean = pred.mean[static_cast<Eigen::Index>(i)];
  }
  return rows;
}

std::string format_frailty_map(std::span<const FrailtyMapRow> rows) {
  std::string out = "period,lon,lat,posterior_mean\n";
  for (const auto& r : rows) {
    out += std::to_string(r.period) + "," + format_number(r.lon) + "," + format_number(r.lat) + "," +
           format_number(r.posterior_mean) + "\n";
  }
  return out;
}

}  // namespace frailty
