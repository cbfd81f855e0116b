#pragma once

#include <utility>
#include <vector>

#include "eks/errors.hpp"
#include "eks/types.hpp"

namespace eks {

/// Symmetric block-tridiagonal matrix: N diagonal n-by-n blocks and N-1
/// sub-diagonal blocks, sub[i] sitting below diag[i]. Diagonal blocks are
/// symmetrized on construction; floating-point assembly drifts at the
/// 1e-16 scale and the factorization assumes exact symmetry.
struct BlockTridiagonalMatrix {
  int n = 0;  ///< block dimension
  int N = 0;  ///< number of diagonal blocks
  std::vector<Matrix> diag;
  std::vector<Matrix> sub;

  BlockTridiagonalMatrix(std::vector<Matrix> diag_blocks,
                         std::vector<Matrix> sub_blocks)
      : diag(std::move(diag_blocks)), sub(std::move(sub_blocks)) {
    if (diag.empty()) throw DimensionMismatch("block tridiagonal: no diagonal blocks");
    N = static_cast<int>(diag.size());
    n = static_cast<int>(diag.front().rows());
    if (static_cast<int>(sub.size()) != N - 1)
      throw DimensionMismatch("block tridiagonal: need N-1 sub-diagonal blocks");
    for (const Matrix& b : diag)
      if (b.rows() != n || b.cols() != n)
        throw DimensionMismatch("block tridiagonal: ragged diagonal block");
    for (const Matrix& b : sub)
      if (b.rows() != n || b.cols() != n)
        throw DimensionMismatch("block tridiagonal: ragged sub-diagonal block");
    for (Matrix& b : diag) b = 0.5 * (b + b.transpose()).eval();
  }

  int dim() const { return n * N; }

  Matrix to_dense() const {
    Matrix dense = Matrix::Zero(dim(), dim());
    for (int i = 0; i < N; ++i) {
      dense.block(i * n, i * n, n, n) = diag[i];
      if (i + 1 < N) {
        dense.block((i + 1) * n, i * n, n, n) = sub[i];
        dense.block(i * n, (i + 1) * n, n, n) = sub[i].transpose();
      }
    }
    return dense;
  }
};

inline Vector multiply(const BlockTridiagonalMatrix& M, const Vector& v) {
  if (v.size() != M.dim())
    throw DimensionMismatch("block tridiagonal multiply: vector length");
  const int n = M.n;
  Vector out(M.dim());
  for (int i = 0; i < M.N; ++i) {
    out.segment(i * n, n) = M.diag[i] * v.segment(i * n, n);
    if (i > 0) out.segment(i * n, n) += M.sub[i - 1] * v.segment((i - 1) * n, n);
    if (i + 1 < M.N)
      out.segment(i * n, n) += M.sub[i].transpose() * v.segment((i + 1) * n, n);
  }
  return out;
}

/// Block-Cholesky factorization M = L L^T with L block lower-bidiagonal:
/// pivot[k] is the dense lower Cholesky factor of the k-th Schur-complemented
/// diagonal block, sub[k] the transformed sub-diagonal block.
struct BlockTriFactorization {
  int n = 0;
  int N = 0;
  std::vector<Matrix> pivot;
  std::vector<Matrix> sub;
};

/// Forward block-Cholesky sweep, O(n^3 N). Throws NotPositiveDefinite with
/// the 1-based block index if a pivot is not positive definite -- the caller
/// either passed an indefinite matrix or chose the regularization too small.
inline BlockTriFactorization factor(const BlockTridiagonalMatrix& M) {
  BlockTriFactorization F;
  F.n = M.n;
  F.N = M.N;
  F.pivot.reserve(M.N);
  F.sub.reserve(M.N - 1);
  Matrix schur;
  for (int k = 0; k < M.N; ++k) {
    schur = M.diag[k];
    if (k > 0) {
      // B_k = A_k L_{k-1}^{-T}, schur = C_k - B_k B_k^T
      Matrix B = M.sub[k - 1];
      F.pivot[k - 1]
          .triangularView<Eigen::Lower>()
          .transpose()
          .solveInPlace<Eigen::OnTheRight>(B);
      schur.selfadjointView<Eigen::Lower>().rankUpdate(B, -1.0);
      F.sub.push_back(std::move(B));
    }
    Eigen::LLT<Matrix> llt(schur);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("block tridiagonal factor: pivot not SPD", k + 1);
    F.pivot.push_back(llt.matrixL());
  }
  return F;
}

/// Solves M x = b given factor(M); forward then backward block substitution.
inline Vector solve(const BlockTriFactorization& F, const Vector& b) {
  if (b.size() != F.n * F.N)
    throw DimensionMismatch("block tridiagonal solve: rhs length");
  const int n = F.n;
  Vector x = b;
  for (int k = 0; k < F.N; ++k) {
    auto xk = x.segment(k * n, n);
    if (k > 0) xk -= F.sub[k - 1] * x.segment((k - 1) * n, n);
    F.pivot[k].triangularView<Eigen::Lower>().solveInPlace(xk);
  }
  for (int k = F.N - 1; k >= 0; --k) {
    auto xk = x.segment(k * n, n);
    if (k + 1 < F.N) xk -= F.sub[k].transpose() * x.segment((k + 1) * n, n);
    F.pivot[k].triangularView<Eigen::Lower>().transpose().solveInPlace(xk);
  }
  return x;
}

}  // namespace eks
