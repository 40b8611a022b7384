#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lensid/nn/init.hpp"

namespace lensid::train {

/// Adaptive moment estimation with the usual defaults. Parameters whose
/// gradient tensor is empty (never touched by the last backward pass) are
/// skipped for that step.
template <class T>
class Adam {
 public:
  explicit Adam(nn::NamedParams<T> params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& [name, p] : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->grad = Tensor<T>{};
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k].second;
      if (p->grad.numel() == 0) continue;
      Tensor<double>& m = m_[k];
      Tensor<double>& v = v_[k];
      for (std::int64_t i = 0; i < p->value.numel(); ++i) {
        const double g = double(p->grad[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        p->value[i] -= T(lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

  std::int64_t steps_taken() const { return t_; }

 private:
  nn::NamedParams<T> params_;
  std::vector<Tensor<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

} // namespace lensid::train
