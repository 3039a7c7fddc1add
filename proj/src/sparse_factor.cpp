#include "frailty/sparse_factor.hpp"

#include <algorithm>
#include <cmath>

#include "frailty/error.hpp"

namespace frailty {

void SparseSpdFactor::analyze(const Eigen::SparseMatrix<double>& a) {
  solver_ = std::make_unique<Solver>();
  solver_->analyzePattern(a);
  n_ = a.rows();
  analyzed_ = true;
}

void SparseSpdFactor::factorize(const Eigen::SparseMatrix<double>& a) {
  if (!analyzed_ || a.rows() != n_) analyze(a);
  solver_->factorize(a);
  if (solver_->info() != Eigen::Success || !(solver_->vectorD().array() > 0.0).all() ||
      !solver_->vectorD().allFinite()) {
    throw NumericalError("sparse factorization failed: matrix not positive definite");
  }
}

Eigen::VectorXd SparseSpdFactor::solve(const Eigen::VectorXd& b) const { return solver_->solve(b); }

double SparseSpdFactor::log_det() const { return solver_->vectorD().array().log().sum(); }

Eigen::VectorXd SparseSpdFactor::half_solve(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = solver_->permutationP() * x;
  solver_->matrixL().solveInPlace(y);
  return y.array() / solver_->vectorD().array().sqrt();
}

Eigen::VectorXd SparseSpdFactor::color(const Eigen::VectorXd& z) const {
  Eigen::VectorXd w = z.array() / solver_->vectorD().array().sqrt();
  solver_->matrixU().solveInPlace(w);
  return solver_->permutationPinv() * w;
}

SelectedInverse SparseSpdFactor::selected_inverse() const {
  const auto& lmat = solver_->matrixL().nestedExpression();
  const auto n = static_cast<int>(n_);
  const int* lp = lmat.outerIndexPtr();
  const int* li = lmat.innerIndexPtr();
  const double* lx = lmat.valuePtr();
  const Eigen::VectorXd& d = solver_->vectorD();

  SelectedInverse z;
  z.perm_.assign(solver_->permutationP().indices().data(),
                 solver_->permutationP().indices().data() + n);
  z.col_ptr_.assign(lp, lp + n + 1);
  z.row_idx_.assign(li, li + lp[n]);
  z.offdiag_.assign(lp[n], 0.0);
  z.diag_.assign(n, 0.0);

  // L^T Z = D^{-1} L^{-1}: for column j, with S = struct(L(:, j)),
  //   Z(i, j) = -sum_{k in S} L(k, j) Z(k, i)   (i in S)
  //   Z(j, j) = 1 / D_j - sum_{k in S} L(k, j) Z(k, j)
  // Every Z(k, i) with k, i in S is inside the filled pattern.
  std::vector<int> slot(n, -1);  // row -> position within the current column
  for (int j = n - 1; j >= 0; --j) {
    const int begin = lp[j], end = lp[j + 1];
    for (int p = begin; p < end; ++p) slot[li[p]] = p;
    for (int p = begin; p < end; ++p) z.offdiag_[p] = 0.0;
    for (int p = begin; p < end; ++p) {
      const int i = li[p];
      const double lij = lx[p];
      // diagonal term k == i
      z.offdiag_[p] -= lij * z.diag_[i];
      // pairs (i, k) with k > i, both in S: Z(k, i) stored in column i
      for (int q = lp[i]; q < lp[i + 1]; ++q) {
        const int k = li[q];
        const int sk = slot[k];
        if (sk < 0) continue;
        const double zki = z.offdiag_[q];
        z.offdiag_[p] -= lx[sk] * zki;   // contributes L(k,j) Z(k,i) to Z(i,j)
        z.offdiag_[sk] -= lij * zki;     // contributes L(i,j) Z(i,k) to Z(k,j)
      }
    }
    double djj = 1.0 / d[j];
    for (int p = begin; p < end; ++p) djj -= lx[p] * z.offdiag_[p];
    z.diag_[j] = djj;
    for (int p = begin; p < end; ++p) slot[li[p]] = -1;
  }
  return z;
}

Eigen::VectorXd SelectedInverse::diagonal() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(perm_.size()));
  for (std::size_t i = 0; i < perm_.size(); ++i) out[i] = diag_[perm_[i]];
  return out;
}

double SelectedInverse::operator()(int i, int j) const {
  int a = perm_[i], b = perm_[j];
  if (a == b) return diag_[a];
  if (a > b) std::swap(a, b);
  const auto first = row_idx_.begin() + col_ptr_[a];
  const auto last = row_idx_.begin() + col_ptr_[a + 1];
  const auto it = std::lower_bound(first, last, b);
  if (it == last || *it != b) throw Error("selected inverse: entry outside the factor pattern");
  return offdiag_[it - row_idx_.begin()];
}

}  // namespace frailty
