#include "frailty/gbt.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include "frailty/error.hpp"

namespace frailty {

void TreeTuning::validate() const {
  if (max_depth < 1) throw ValidationError("max_depth must be at least 1");
  if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be at least 1");
  if (!(l2_lambda >= 0.0)) throw ValidationError("l2_lambda must be nonnegative");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (max_trees < 0) throw ValidationError("max_trees must be nonnegative");
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, int num_features)
    : nodes_(std::move(nodes)), num_features_(num_features) {
  if (nodes_.empty()) throw ValidationError("tree without nodes");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    if (node.feature >= num_features_ || node.left <= 0 || node.right <= 0 || node.left >= n ||
        node.right >= n) {
      throw ValidationError("malformed tree node");
    }
  }
}

double RegressionTree::predict(const double* row, Eigen::Index stride) const {
  int k = 0;
  while (!nodes_[k].is_leaf()) {
    const TreeNode& node = nodes_[k];
    k = row[node.feature * stride] <= node.threshold ? node.left : node.right;
  }
  return nodes_[k].value;
}

int RegressionTree::num_leaves() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(),
                                        [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].is_leaf()) continue;
    d[nodes_[k].left] = d[nodes_[k].right] = d[k] + 1;
    best = std::max(best, d[k] + 1);
  }
  return best;
}

namespace {

struct Candidate {
  int node = 0;
  int depth = 0;
  std::vector<int> rows;
  double sum = 0.0;
  // best split
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  std::size_t order = 0;  // insertion counter for deterministic ordering
};

double score(double sum, double count, double lambda) { return sum * sum / (count + lambda); }

void find_split(const Eigen::MatrixXd& X, std::span<const double> t, const TreeTuning& tuning,
                Candidate& c) {
  c.gain = 0.0;
  c.feature = -1;
  const auto n = static_cast<int>(c.rows.size());
  if (c.depth >= tuning.max_depth || n < 2 * tuning.min_samples_leaf) return;
  const double parent = score(c.sum, n, tuning.l2_lambda);
  std::vector<int> idx(c.rows);
  for (int f = 0; f < X.cols(); ++f) {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      const double xa = X(a, f), xb = X(b, f);
      return xa < xb || (xa == xb && a < b);
    });
    double left = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
      left += t[idx[k]];
      const double xk = X(idx[k], f), xn = X(idx[k + 1], f);
      if (xk == xn) continue;
      const int nl = k + 1, nr = n - nl;
      if (nl < tuning.min_samples_leaf) continue;
      if (nr < tuning.min_samples_leaf) break;
      const double gain = score(left, nl, tuning.l2_lambda) +
                          score(c.sum - left, nr, tuning.l2_lambda) - parent;
      if (gain > c.gain) {
        c.gain = gain;
        c.feature = f;
        c.threshold = xk + 0.5 * (xn - xk);
      }
    }
  }
  // Guard against splits that only reflect rounding in the sums.
  if (c.gain <= 1e-12 * std::max(1.0, parent)) c.feature = -1;
}

}  // namespace

RegressionTree fit_tree(const Eigen::MatrixXd& X, std::span<const double> targets,
                        const TreeTuning& tuning) {
  tuning.validate();
  if (X.rows() == 0) throw ValidationError("fit_tree: empty input");
  if (static_cast<std::size_t>(X.rows()) != targets.size()) {
    throw ValidationError("fit_tree: rows of X and targets differ");
  }
  const auto leaf_value = [&](double sum, std::size_t count) {
    return sum / (static_cast<double>(count) + tuning.l2_lambda);
  };

  std::vector<TreeNode> nodes(1);
  Candidate root;
  root.rows.resize(X.rows());
  std::iota(root.rows.begin(), root.rows.end(), 0);
  for (double v : targets) root.sum += v;
  nodes[0].value = leaf_value(root.sum, root.rows.size());
  nodes[0].count = static_cast<int>(root.rows.size());
  find_split(X, targets, tuning, root);

  auto worse = [](const Candidate& a, const Candidate& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    return a.order > b.order;
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> queue(worse);
  std::size_t counter = 0;
  if (root.feature >= 0) queue.push(std::move(root));

  while (!queue.empty()) {
    Candidate c = queue.top();
    queue.pop();
    Candidate kids[2];
    for (int r : c.rows) {
      const int side = X(r, c.feature) <= c.threshold ? 0 : 1;
      kids[side].rows.push_back(r);
      kids[side].sum += targets[r];
    }
    TreeNode& parent = nodes[c.node];
    parent.feature = c.feature;
    parent.threshold = c.threshold;
    parent.left = static_cast<int>(nodes.size());
    parent.right = parent.left + 1;
    for (auto& kid : kids) {
      kid.node = static_cast<int>(nodes.size());
      kid.depth = c.depth + 1;
      kid.order = ++counter;
      TreeNode leaf;
      leaf.value = leaf_value(kid.sum, kid.rows.size());
      leaf.count = static_cast<int>(kid.rows.size());
      nodes.push_back(leaf);
      find_split(X, targets, tuning, kid);
      if (kid.feature >= 0) queue.push(std::move(kid));
    }
  }
  return RegressionTree(std::move(nodes), static_cast<int>(X.cols()));
}

Eigen::VectorXd predict_tree(const RegressionTree& tree, const Eigen::MatrixXd& X) {
  if (X.cols() != tree.num_features()) {
    throw ValidationError("predict_tree: feature count differs from training");
  }
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = tree.predict(X.data() + i, X.rows());
  return out;
}

Eigen::VectorXd predict_ensemble(std::span<const RegressionTree> trees, double learning_rate,
                                 double F0, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), F0);
  for (const auto& tree : trees) out += learning_rate * predict_tree(tree, X);
  return out;
}

}  // namespace frailty
