#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace lensid {

// Thin wrappers so the rest of the code never touches Eigen types directly.
// All matrices are row-major contiguous, as stored in Tensor<T>.

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// C = A(m,k) * B(k,n), overwriting C.
template <class T>
void gemm(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  MatMap<T>(c, m, n).noalias() = ConstMatMap<T>(a, m, k) * ConstMatMap<T>(b, k, n);
}

/// C += A(m,k) * B(k,n).
template <class T>
void gemm_acc(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  MatMap<T>(c, m, n).noalias() += ConstMatMap<T>(a, m, k) * ConstMatMap<T>(b, k, n);
}

/// C = A^T(k,m) * B(k,n); A is stored (k,m) row-major.
template <class T>
void gemm_at(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  MatMap<T>(c, m, n).noalias() = ConstMatMap<T>(a, k, m).transpose() * ConstMatMap<T>(b, k, n);
}

/// C += A^T(k,m) * B(k,n); A is stored (k,m) row-major.
template <class T>
void gemm_at_acc(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  MatMap<T>(c, m, n).noalias() += ConstMatMap<T>(a, k, m).transpose() * ConstMatMap<T>(b, k, n);
}

/// C += A(m,k) * B^T(n,k).
template <class T>
void gemm_bt_acc(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n) {
  MatMap<T>(c, m, n).noalias() += ConstMatMap<T>(a, m, k) * ConstMatMap<T>(b, n, k).transpose();
}

/// C = A(m,k) * B(k,n) where C rows are ldc apart (ldc >= n).
template <class T>
void gemm_strided_out(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n,
                      std::int64_t ldc) {
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
             Eigen::OuterStride<>>
      cm(c, m, n, Eigen::OuterStride<>(ldc));
  cm.noalias() = ConstMatMap<T>(a, m, k) * ConstMatMap<T>(b, k, n);
}

} // namespace lensid
