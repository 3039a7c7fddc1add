#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace frailty {

// Entries of A^{-1} restricted to the filled pattern of the Cholesky factor
// (Takahashi recursion). Covers every (i, j) with A(i, j) != 0.
class SelectedInverse {
 public:
  SelectedInverse() = default;

  Eigen::VectorXd diagonal() const;
  // Throws if (i, j) lies outside the filled pattern.
  double operator()(int i, int j) const;

 private:
  friend class SparseSpdFactor;
  std::vector<int> perm_;     // original -> factor index
  std::vector<int> col_ptr_;  // strict lower part, CSC, factor indexing
  std::vector<int> row_idx_;
  std::vector<double> offdiag_;
  std::vector<double> diag_;
};

// LDL^T factorization of a sparse SPD matrix with AMD ordering.
class SparseSpdFactor {
 public:
  // Symbolic analysis; reused while the pattern is unchanged.
  void analyze(const Eigen::SparseMatrix<double>& a);
  // Throws NumericalError when a is not positive definite.
  void factorize(const Eigen::SparseMatrix<double>& a);

  bool analyzed() const { return analyzed_; }
  // Drop the symbolic analysis (the sparsity pattern is about to change).
  void reset() {
    solver_.reset();
    analyzed_ = false;
    n_ = 0;
  }
  Eigen::Index size() const { return n_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  double log_det() const;
  // D^{-1/2} L^{-1} P x, so that x^T A^{-1} x equals its squared norm.
  Eigen::VectorXd half_solve(const Eigen::VectorXd& x) const;
  // P^T L^{-T} D^{-1/2} z: maps N(0, I) draws to N(0, A^{-1}).
  Eigen::VectorXd color(const Eigen::VectorXd& z) const;

  SelectedInverse selected_inverse() const;

 private:
  using Solver = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower,
                                       Eigen::AMDOrdering<int>>;
  std::unique_ptr<Solver> solver_;
  Eigen::Index n_ = 0;
  bool analyzed_ = false;
};

}  // namespace frailty
