#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <vector>

#include "mto/types.hpp"

namespace mto {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

// Worker count used by element loops; 1 runs inline.
void set_num_threads(int n);
int num_threads();

// Calls fn(i) for i in [0, n). Work is split into contiguous blocks; the
// caller is responsible for writing results to per-index slots so that
// any later reduction is order independent of the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

// LU factorization of a general sparse matrix (UMFPACK when available).
class SparseLU {
 public:
  SparseLU();
  ~SparseLU();
  SparseLU(SparseLU&&) noexcept;
  SparseLU& operator=(SparseLU&&) noexcept;
  void factorize(const SpMat& A);
  VecX solve(const VecX& b) const;
  static const char* backend();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// LDL^T factorization of a symmetric positive definite matrix; throws if a
// pivot is not positive.
class SymmetricSolver {
 public:
  SymmetricSolver();
  ~SymmetricSolver();
  SymmetricSolver(SymmetricSolver&&) noexcept;
  SymmetricSolver& operator=(SymmetricSolver&&) noexcept;
  void factorize(const SpMat& A);
  VecX solve(const VecX& b) const;
  double min_pivot() const { return min_pivot_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double min_pivot_ = 0.0;
};

}  // namespace mto
