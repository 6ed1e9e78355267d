#include "mto/linalg.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#ifdef MTO_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

namespace mto {

namespace {
int g_threads = 1;
}

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int t = std::min(g_threads, n);
  if (t <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (int k = 0; k < t; ++k) {
    const int lo = static_cast<int>(static_cast<long>(n) * k / t);
    const int hi = static_cast<int>(static_cast<long>(n) * (k + 1) / t);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

namespace {
// Set once a UMFPACK solve fails its residual check (seen with broken BLAS
// kernels); every later factorization then uses the Eigen backend.
std::atomic<bool> g_umfpack_disabled{false};
}

struct SparseLU::Impl {
#ifdef MTO_HAVE_UMFPACK
  Eigen::UmfPackLU<SpMat> umf;
  bool use_umf = false;
#endif
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  SpMat A;
  double norm_A = 0.0;  // max absolute row sum

  void factor_eigen() {
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed (singular system?)");
  }
};

SparseLU::SparseLU() : impl_(std::make_unique<Impl>()) {}
SparseLU::~SparseLU() = default;
SparseLU::SparseLU(SparseLU&&) noexcept = default;
SparseLU& SparseLU::operator=(SparseLU&&) noexcept = default;

const char* SparseLU::backend() {
#ifdef MTO_HAVE_UMFPACK
  if (!g_umfpack_disabled) return "umfpack";
#endif
  return "eigen-sparselu";
}

void SparseLU::factorize(const SpMat& A) {
  Impl& m = *impl_;
  m.A = A;
  m.A.makeCompressed();
  m.norm_A = (SpMat(m.A.cwiseAbs()) * VecX::Ones(m.A.cols())).maxCoeff();
#ifdef MTO_HAVE_UMFPACK
  m.use_umf = !g_umfpack_disabled;
  if (m.use_umf) {
    m.umf.compute(m.A);
    if (m.umf.info() == Eigen::Success) return;
    m.use_umf = false;
  }
#endif
  m.factor_eigen();
}

VecX SparseLU::solve(const VecX& b) const {
  Impl& m = *impl_;
  VecX x;
#ifdef MTO_HAVE_UMFPACK
  if (m.use_umf) {
    x = m.umf.solve(b);
    if (m.umf.info() == Eigen::Success && x.allFinite()) {
      const double tol = 1e-9 * (m.norm_A * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>());
      if ((m.A * x - b).lpNorm<Eigen::Infinity>() <= tol) return x;
    }
    g_umfpack_disabled = true;
    m.use_umf = false;
    m.factor_eigen();
  }
#endif
  x = m.lu.solve(b);
  if (m.lu.info() != Eigen::Success || !x.allFinite()) throw SolverError("sparse LU solve failed");
  return x;
}

struct SymmetricSolver::Impl {
  Eigen::SimplicialLDLT<SpMat> ldlt;
};

SymmetricSolver::SymmetricSolver() : impl_(std::make_unique<Impl>()) {}
SymmetricSolver::~SymmetricSolver() = default;
SymmetricSolver::SymmetricSolver(SymmetricSolver&&) noexcept = default;
SymmetricSolver& SymmetricSolver::operator=(SymmetricSolver&&) noexcept = default;

void SymmetricSolver::factorize(const SpMat& A) {
  impl_->ldlt.compute(A);
  if (impl_->ldlt.info() != Eigen::Success) throw SolverError("LDL^T factorization failed");
  min_pivot_ = impl_->ldlt.vectorD().minCoeff();
  if (!(min_pivot_ > 0.0)) throw SolverError("filter matrix is not positive definite");
}

VecX SymmetricSolver::solve(const VecX& b) const {
  VecX x = impl_->ldlt.solve(b);
  if (!x.allFinite()) throw SolverError("LDL^T solve failed");
  return x;
}

}  // namespace mto
