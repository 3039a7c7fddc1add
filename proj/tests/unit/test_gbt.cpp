#include <doctest.h>

#include <vector>

#include "frailty/error.hpp"
#include "frailty/gbt.hpp"
#include "frailty/rng.hpp"

using namespace frailty;

namespace {

TreeTuning tuning(int depth, int leaf, double lambda) {
  TreeTuning t;
  t.max_depth = depth;
  t.min_samples_leaf = leaf;
  t.l2_lambda = lambda;
  return t;
}

double sse(const Eigen::VectorXd& pred, const std::vector<double>& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = pred[static_cast<Eigen::Index>(i)] - t[i];
    s += r * r;
  }
  return s;
}

}  // namespace

TEST_CASE("constant targets give a single shrunken leaf") {
  Eigen::MatrixXd X(20, 2);
  X.setRandom();
  const std::vector<double> t(20, 3.0);
  const RegressionTree tree = fit_tree(X, t, tuning(4, 1, 5.0));
  CHECK(tree.num_leaves() == 1);
  CHECK(tree.nodes()[0].value == doctest::Approx(3.0 * 20 / 25.0));
}

TEST_CASE("step function is split at the step") {
  Eigen::MatrixXd X(10, 2);
  std::vector<double> t(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = i;
    X(i, 1) = (i * 7) % 10;
    t[static_cast<std::size_t>(i)] = i < 4 ? -1.0 : 2.0;
  }
  const RegressionTree tree = fit_tree(X, t, tuning(1, 1, 0.0));
  REQUIRE(tree.num_leaves() == 2);
  const TreeNode& root = tree.nodes()[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == doctest::Approx(3.5));
  CHECK(tree.nodes()[static_cast<std::size_t>(root.left)].value == doctest::Approx(-1.0));
  CHECK(tree.nodes()[static_cast<std::size_t>(root.right)].value == doctest::Approx(2.0));
}

TEST_CASE("min_samples_leaf = n forces a single leaf") {
  Rng rng(1);
  Eigen::MatrixXd X(30, 3);
  std::vector<double> t(30);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform();
    t[static_cast<std::size_t>(i)] = rng.normal();
  }
  CHECK(fit_tree(X, t, tuning(5, 30, 0.0)).num_leaves() == 1);
  CHECK_THROWS(fit_tree(Eigen::MatrixXd(0, 3), {}, tuning(2, 1, 0.0)));
}

TEST_CASE("tree invariants") {
  Rng rng(2);
  const int n = 200;
  Eigen::MatrixXd X(n, 3);
  std::vector<double> t(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform();
    t[static_cast<std::size_t>(i)] = std::sin(6 * X(i, 0)) + X(i, 1) * X(i, 2) + 0.1 * rng.normal();
    mean += t[static_cast<std::size_t>(i)] / n;
  }
  const TreeTuning tt = tuning(4, 10, 0.0);
  const RegressionTree tree = fit_tree(X, t, tt);
  CHECK(tree.depth() <= 4);
  for (const auto& node : tree.nodes()) {
    if (node.is_leaf()) CHECK(node.count >= 10);
  }
  CHECK(sse(predict_tree(tree, X), t) <= sse(Eigen::VectorXd::Constant(n, mean), t));
  CHECK(fit_tree(X, t, tt) == tree);

  // leaf values shrink toward zero with lambda, structure fixed by min leaf
  const RegressionTree t0 = fit_tree(X, t, tuning(1, 100, 0.0));
  const RegressionTree t1 = fit_tree(X, t, tuning(1, 100, 10.0));
  REQUIRE(t0.nodes().size() == t1.nodes().size());
  for (std::size_t k = 0; k < t0.nodes().size(); ++k) {
    if (t0.nodes()[k].is_leaf()) CHECK(std::abs(t1.nodes()[k].value) <= std::abs(t0.nodes()[k].value));
  }
}

TEST_CASE("ensemble prediction") {
  Eigen::MatrixXd X(5, 2);
  X.setRandom();
  CHECK(predict_ensemble({}, 0.1, -1.5, X).isApprox(Eigen::VectorXd::Constant(5, -1.5)));

  TreeNode leaf;
  leaf.value = 4.0;
  leaf.count = 5;
  const std::vector<RegressionTree> one{RegressionTree({leaf}, 2)};
  CHECK(predict_ensemble(one, 0.1, 1.0, X).isApprox(Eigen::VectorXd::Constant(5, 1.4)));

  Rng rng(3);
  Eigen::MatrixXd Z(50, 2);
  std::vector<double> t(50);
  for (int i = 0; i < 50; ++i) {
    Z(i, 0) = rng.uniform();
    Z(i, 1) = rng.uniform();
    t[static_cast<std::size_t>(i)] = Z(i, 0) > 0.5 ? 1.0 : 0.0;
  }
  std::vector<RegressionTree> trees{fit_tree(Z, t, tuning(2, 3, 0.0)), fit_tree(Z, t, tuning(3, 2, 1.0))};
  const Eigen::VectorXd batch = predict_ensemble(trees, 0.3, 0.2, Z);
  for (int i = 0; i < 50; ++i) {
    const Eigen::MatrixXd row = Z.row(i);
    CHECK(predict_ensemble(trees, 0.3, 0.2, row)[0] == batch[i]);
  }
  CHECK_THROWS(predict_tree(trees[0], Eigen::MatrixXd(3, 5)));
}
