#pragma once

#include "lensid/ag/conv.hpp"
#include "lensid/ag/deform.hpp"
#include "lensid/ag/norm.hpp"
#include "lensid/ag/ops.hpp"
#include "lensid/nn/init.hpp"

namespace lensid::nn {

// Layers are value types holding shared parameter handles: copying a layer
// shares its weights, which is how weight-shared branches are expressed.

template <class T>
struct Conv2d {
  ag::Var<T> w, b;  // b empty when the layer has no bias
  std::int64_t stride = 1, pad = 0, groups = 1;

  Conv2d() = default;
  Conv2d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t k, std::int64_t stride_,
         std::int64_t pad_, Rng& rng, std::int64_t groups_ = 1, bool bias = true)
      : stride(stride_), pad(pad_), groups(groups_) {
    check(in_ch % groups == 0, ErrorKind::config, "Conv2d: in_ch not divisible by groups");
    const std::int64_t fan_in = (in_ch / groups) * k * k;
    w = ag::parameter(he_normal<T>({out_ch, in_ch / groups, k, k}, fan_in, rng));
    if (bias) b = ag::parameter(Tensor<T>({out_ch}));
  }

  /// All-zero weights and bias; used for offset branches so they start as
  /// the identity displacement.
  static Conv2d zeros(std::int64_t in_ch, std::int64_t out_ch, std::int64_t k,
                      std::int64_t stride_, std::int64_t pad_) {
    Conv2d c;
    c.stride = stride_;
    c.pad = pad_;
    c.w = ag::parameter(Tensor<T>({out_ch, in_ch, k, k}));
    c.b = ag::parameter(Tensor<T>({out_ch}));
    return c;
  }

  ag::Var<T> forward(const ag::Var<T>& x) const {
    return ag::conv2d(x, w, b, stride, pad, groups);
  }

  void params(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(join_name(prefix, "w"), w);
    if (b) out.emplace_back(join_name(prefix, "b"), b);
  }
  void state(const std::string& prefix, NamedTensors<T>& out) const {
    out.emplace_back(join_name(prefix, "w"), &w->value);
    if (b) out.emplace_back(join_name(prefix, "b"), &b->value);
  }
};

template <class T>
struct Dense {
  ag::Var<T> w, b;

  Dense() = default;
  Dense(std::int64_t in_f, std::int64_t out_f, Rng& rng) {
    w = ag::parameter(glorot_uniform<T>({in_f, out_f}, in_f, out_f, rng));
    b = ag::parameter(Tensor<T>({out_f}));
  }

  ag::Var<T> forward(const ag::Var<T>& x) const {
    return ag::add_rowvec(ag::matmul(x, w), b);
  }

  void params(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(join_name(prefix, "w"), w);
    out.emplace_back(join_name(prefix, "b"), b);
  }
  void state(const std::string& prefix, NamedTensors<T>& out) const {
    out.emplace_back(join_name(prefix, "w"), &w->value);
    out.emplace_back(join_name(prefix, "b"), &b->value);
  }
};

template <class T>
struct LayerNorm {
  ag::Var<T> gamma, beta;
  double eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(std::int64_t channels) {
    gamma = ag::parameter(Tensor<T>::ones({channels}));
    beta = ag::parameter(Tensor<T>({channels}));
  }

  ag::Var<T> forward(const ag::Var<T>& x) const { return ag::layer_norm(x, gamma, beta, eps); }

  void params(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(join_name(prefix, "gamma"), gamma);
    out.emplace_back(join_name(prefix, "beta"), beta);
  }
  void state(const std::string& prefix, NamedTensors<T>& out) const {
    out.emplace_back(join_name(prefix, "gamma"), &gamma->value);
    out.emplace_back(join_name(prefix, "beta"), &beta->value);
  }
};

template <class T>
struct BatchNorm2d {
  ag::Var<T> gamma, beta;
  std::shared_ptr<Tensor<T>> running_mean, running_var;
  double eps = 1e-5, momentum = 0.1;

  BatchNorm2d() = default;
  explicit BatchNorm2d(std::int64_t channels) {
    gamma = ag::parameter(Tensor<T>::ones({channels}));
    beta = ag::parameter(Tensor<T>({channels}));
    running_mean = std::make_shared<Tensor<T>>(Shape{channels});
    running_var = std::make_shared<Tensor<T>>(Tensor<T>::ones({channels}));
  }

  ag::Var<T> forward(const ag::Var<T>& x, bool training) const {
    return ag::batch_norm(x, gamma, beta, *running_mean, *running_var, training, momentum, eps);
  }

  void params(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(join_name(prefix, "gamma"), gamma);
    out.emplace_back(join_name(prefix, "beta"), beta);
  }
  void state(const std::string& prefix, NamedTensors<T>& out) const {
    out.emplace_back(join_name(prefix, "gamma"), &gamma->value);
    out.emplace_back(join_name(prefix, "beta"), &beta->value);
    out.emplace_back(join_name(prefix, "running_mean"), running_mean.get());
    out.emplace_back(join_name(prefix, "running_var"), running_var.get());
  }
  void buffers(const std::string& prefix, NamedTensors<T>& out) const {
    out.emplace_back(join_name(prefix, "running_mean"), running_mean.get());
    out.emplace_back(join_name(prefix, "running_var"), running_var.get());
  }
};

} // namespace lensid::nn
