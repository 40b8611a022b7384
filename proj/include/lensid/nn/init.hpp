#pragma once

#include <Eigen/QR>
#include <string>
#include <utility>
#include <vector>

#include "lensid/ag/autograd.hpp"

namespace lensid::nn {

template <class T>
using NamedParams = std::vector<std::pair<std::string, ag::Var<T>>>;

/// Parameter values plus non-trainable buffers, for checkpoint I/O.
template <class T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>*>>;

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

template <class T>
Tensor<T> he_normal(Shape shape, std::int64_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double std_dev = std::sqrt(2.0 / double(fan_in));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.normal() * std_dev);
  return t;
}

template <class T>
Tensor<T> glorot_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = T(rng.uniform(-limit, limit));
  return t;
}

/// Random orthogonal (rows, cols) matrix via QR of a Gaussian matrix.
template <class T>
Tensor<T> orthogonal(std::int64_t rows, std::int64_t cols, Rng& rng) {
  const std::int64_t big = std::max(rows, cols);
  Eigen::MatrixXd a(big, big);
  for (std::int64_t i = 0; i < big; ++i)
    for (std::int64_t j = 0; j < big; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (std::int64_t j = 0; j < big; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  Tensor<T> t({rows, cols});
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) t(i, j) = T(q(i, j));
  return t;
}

} // namespace lensid::nn
