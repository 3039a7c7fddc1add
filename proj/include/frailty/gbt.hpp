#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace frailty {

struct TreeTuning {
  int max_depth = 5;
  int min_samples_leaf = 10;
  double l2_lambda = 0.0;
  double learning_rate = 0.1;
  int max_trees = 100;

  void validate() const;
  friend bool operator==(const TreeTuning&, const TreeTuning&) = default;
};

// Leaves have feature == -1. Rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int count = 0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes, int num_features);

  double predict(const double* row, Eigen::Index stride = 1) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int num_features() const { return num_features_; }
  int num_leaves() const;
  int depth() const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<TreeNode> nodes_{TreeNode{}};
  int num_features_ = 0;
};

// Least-squares tree, grown best-first with exact split search.
RegressionTree fit_tree(const Eigen::MatrixXd& X, std::span<const double> targets,
                        const TreeTuning& tuning);

Eigen::VectorXd predict_tree(const RegressionTree& tree, const Eigen::MatrixXd& X);

// F0 + learning_rate * sum of tree outputs.
Eigen::VectorXd predict_ensemble(std::span<const RegressionTree> trees, double learning_rate,
                                 double F0, const Eigen::MatrixXd& X);

}  // namespace frailty
