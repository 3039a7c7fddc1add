#include "frailty/vecchia.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>

#include "frailty/error.hpp"
#include "frailty/rng.hpp"

namespace frailty {

std::vector<int> order_points(std::span<const SpaceTimePoint> points, OrderingStrategy strategy,
                              std::uint64_t seed) {
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  if (strategy == OrderingStrategy::time_then_random) {
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return points[a].t < points[b].t; });
  }
  return order;
}

NeighborSets select_neighbors(std::span<const SpaceTimePoint> points, std::span<const int> order,
                              int m, NeighborMetric metric, const CovarianceParams& params) {
  if (m < 1) throw ValidationError("neighbor budget m must be at least 1");
  const auto n = static_cast<int>(order.size());
  auto dist2 = [&](const SpaceTimePoint& p, const SpaceTimePoint& q) {
    if (metric == NeighborMetric::correlation) {
      const ScaledComponents c = scaled_components(p, q, params);
      return c.dt2 + c.ds2;
    }
    const double dt = p.t - q.t, dx = p.x - q.x, dy = p.y - q.y;
    return dt * dt + dx * dx + dy * dy;
  };

  NeighborSets neighbors(n);
  using Entry = std::pair<double, int>;  // max-heap on (distance, position)
  std::vector<Entry> heap;
  heap.reserve(m + 1);
  for (int i = 1; i < n; ++i) {
    auto& nb = neighbors[i];
    if (i <= m) {
      nb.resize(i);
      std::iota(nb.begin(), nb.end(), 0);
      continue;
    }
    heap.clear();
    const SpaceTimePoint& p = points[order[i]];
    for (int j = 0; j < i; ++j) {
      const Entry e{dist2(p, points[order[j]]), j};
      if (static_cast<int>(heap.size()) < m) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end());
      } else if (e < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    nb.reserve(m);
    for (const Entry& e : heap) nb.push_back(e.second);
    std::sort(nb.begin(), nb.end());
  }
  return neighbors;
}

Eigen::VectorXd VecchiaStructure::residual(const Eigen::VectorXd& b) const {
  Eigen::VectorXd r(size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    double v = b[order[i]];
    const auto& nb = neighbors[i];
    for (std::size_t k = 0; k < nb.size(); ++k) v -= coef[i][k] * b[order[nb[k]]];
    r[i] = v;
  }
  return r;
}

Eigen::SparseMatrix<double> VecchiaStructure::factor_matrix() const {
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < size(); ++i) {
    trip.emplace_back(i, order[i], 1.0);
    const auto& nb = neighbors[i];
    for (std::size_t k = 0; k < nb.size(); ++k) trip.emplace_back(i, order[nb[k]], -coef[i][k]);
  }
  Eigen::SparseMatrix<double> b(size(), size());
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

Eigen::SparseMatrix<double> VecchiaStructure::precision() const {
  const Eigen::SparseMatrix<double> b = factor_matrix();
  const Eigen::VectorXd inv_d = cond_var.cwiseInverse();
  Eigen::SparseMatrix<double> q = b.transpose() * inv_d.asDiagonal() * b;
  return q;
}

double VecchiaStructure::log_det_precision() const { return -cond_var.array().log().sum(); }

VecchiaStructure build_factor(std::span<const SpaceTimePoint> points, std::vector<int> order,
                              NeighborSets neighbors, const CovarianceParams& params,
                              bool with_gradient, double jitter) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(order.size());
  if (static_cast<Eigen::Index>(neighbors.size()) != n) {
    throw ValidationError("build_factor: neighbor sets do not match the ordering");
  }
  const int np = params.size();
  VecchiaStructure s;
  s.order = std::move(order);
  s.neighbors = std::move(neighbors);
  s.coef.resize(n);
  s.cond_var.resize(n);
  s.m = 0;
  if (with_gradient) {
    s.coef_grad.resize(n);
    s.cond_var_grad.resize(n, np);
  }

  std::vector<double> g(np);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& nb = s.neighbors[i];
    const auto k = static_cast<Eigen::Index>(nb.size());
    s.m = std::max<int>(s.m, static_cast<int>(k));
    const SpaceTimePoint& pi = points[s.order[i]];
    const double cii = covariance(pi, pi, params, true, jitter);
    if (k == 0) {
      s.coef[i].resize(0);
      s.cond_var[i] = cii;
      if (with_gradient) {
        s.coef_grad[i].resize(0, np);
        covariance_gradient(pi, pi, params, true, jitter, g);
        for (int p = 0; p < np; ++p) s.cond_var_grad(i, p) = g[p];
      }
      continue;
    }
    for (auto j : nb) {
      if (j >= i) throw ValidationError("build_factor: neighbor not earlier in the ordering");
    }

    Eigen::MatrixXd cnn(k, k);
    Eigen::VectorXd cin(k);
    std::vector<Eigen::MatrixXd> dcnn;
    std::vector<Eigen::VectorXd> dcin;
    Eigen::VectorXd dcii(np);
    if (with_gradient) {
      dcnn.assign(np, Eigen::MatrixXd(k, k));
      dcin.assign(np, Eigen::VectorXd(k));
      covariance_gradient(pi, pi, params, true, jitter, g);
      for (int p = 0; p < np; ++p) dcii[p] = g[p];
    }
    for (Eigen::Index a = 0; a < k; ++a) {
      const SpaceTimePoint& pa = points[s.order[nb[a]]];
      cin[a] = covariance(pi, pa, params, false);
      if (with_gradient) {
        covariance_gradient(pi, pa, params, false, jitter, g);
        for (int p = 0; p < np; ++p) dcin[p][a] = g[p];
      }
      for (Eigen::Index b = 0; b <= a; ++b) {
        const SpaceTimePoint& pb = points[s.order[nb[b]]];
        cnn(a, b) = cnn(b, a) = covariance(pa, pb, params, a == b, jitter);
        if (with_gradient) {
          covariance_gradient(pa, pb, params, a == b, jitter, g);
          for (int p = 0; p < np; ++p) dcnn[p](a, b) = dcnn[p](b, a) = g[p];
        }
      }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(cnn);
    if (llt.info() != Eigen::Success) {
      cnn.diagonal().array() += 1e-8 * params.sigma2;
      llt.compute(cnn);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("build_factor: singular neighbor covariance at row " +
                             std::to_string(i));
      }
    }
    const Eigen::VectorXd a = llt.solve(cin);
    s.coef[i] = a;
    s.cond_var[i] = std::max(cii - cin.dot(a), 1e-14 * params.sigma2);
    if (with_gradient) {
      s.coef_grad[i].resize(k, np);
      for (int p = 0; p < np; ++p) {
        const Eigen::VectorXd da = llt.solve(dcin[p] - dcnn[p] * a);
        s.coef_grad[i].col(p) = da;
        s.cond_var_grad(i, p) = dcii[p] - 2.0 * a.dot(dcin[p]) + a.dot(dcnn[p] * a);
      }
    }
  }
  return s;
}

double latent_log_density(const Eigen::VectorXd& b, const VecchiaStructure& structure) {
  if (b.size() != structure.size()) {
    throw ValidationError("latent_log_density: length mismatch");
  }
  const Eigen::VectorXd r = structure.residual(b);
  const double n = static_cast<double>(b.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + structure.cond_var.array().log().sum() +
                 (r.array().square() / structure.cond_var.array()).sum());
}

bool refresh_schedule(long iteration) {
  return iteration >= 1 && (iteration & (iteration - 1)) == 0;
}

}  // namespace frailty
