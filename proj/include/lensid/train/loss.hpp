#pragma once

#include <cmath>
#include <cstdint>

#include "lensid/ag/ops.hpp"

namespace lensid::train {

struct LossConfig {
  double lambda = 0.8;      // weight of the cross-entropy term
  double dice_smooth = 1.0;

  void validate() const {
    check(lambda >= 0.0 && lambda <= 1.0, ErrorKind::config,
          "loss: lambda must be in [0,1]");
    check(dice_smooth > 0.0, ErrorKind::config, "loss: dice_smooth must be positive");
  }
};

/// (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth) over the whole batch.
/// probs_fg is the foreground-class probability map, target is {0,1}.
template <class T>
ag::Var<T> soft_dice(const ag::Var<T>& probs_fg, const Tensor<T>& target, double smooth) {
  check(probs_fg->value.numel() == target.numel(), ErrorKind::shape,
        "soft_dice: prediction and target sizes differ");
  check(smooth > 0.0, ErrorKind::config, "soft_dice: smooth must be positive");
  ag::Var<T> g = ag::constant(target.reshaped(probs_fg->value.shape()));
  ag::Var<T> inter = ag::sum_all(ag::mul(probs_fg, g));
  ag::Var<T> total = ag::add(ag::sum_all(probs_fg), ag::sum_all(g));
  return ag::div(ag::add_scalar(ag::mul_scalar(inter, T(2)), T(smooth)),
                 ag::add_scalar(total, T(smooth)));
}

/// Categorical cross entropy averaged over pixels; probs is a per-pixel
/// class distribution (N,K,H,W) and labels holds class indices (N,H,W).
template <class T>
ag::Var<T> cross_entropy(const ag::Var<T>& probs, const Tensor<std::int32_t>& labels) {
  ag::Var<T> picked = ag::select_index1(probs, labels);
  return ag::neg(ag::mean_all(ag::log_e(picked)));
}

/// lambda * CE - (1-lambda) * log2(soft dice), from 2-class logits and a
/// binary target mask.
template <class T>
ag::Var<T> combined_loss(const ag::Var<T>& logits, const Tensor<std::int32_t>& target,
                         const LossConfig& cfg) {
  cfg.validate();
  check(logits->value.rank() == 4 && logits->value.dim(1) == 2, ErrorKind::shape,
        "combined_loss: logits must be (N,2,H,W)");
  check(target.rank() == 3 && target.dim(0) == logits->value.dim(0) &&
            target.dim(1) == logits->value.dim(2) && target.dim(2) == logits->value.dim(3),
        ErrorKind::shape, "combined_loss: target must be (N,H,W) matching the logits");
  ag::Var<T> probs = ag::softmax_axis1(logits);
  ag::Var<T> ce = cross_entropy(probs, target);
  Tensor<T> fg(target.shape());
  for (std::int64_t i = 0; i < target.numel(); ++i) fg[i] = T(target[i]);
  ag::Var<T> dice = soft_dice(ag::slice_axis1(probs, 1, 2), fg, cfg.dice_smooth);
  return ag::add(ag::mul_scalar(ce, T(cfg.lambda)),
                 ag::mul_scalar(ag::log2(dice), T(-(1.0 - cfg.lambda))));
}

/// Numerically stable binary cross entropy from logits, averaged over all
/// elements: mean(max(z,0) - z*y + log(1+exp(-|z|))). Gradient is
/// (sigmoid(z) - y) / count.
template <class T>
ag::Var<T> bce_with_logits(const ag::Var<T>& logits, const Tensor<T>& targets) {
  check(logits->value.shape() == targets.shape(), ErrorKind::shape,
        "bce_with_logits: logits and targets must have the same shape");
  const std::int64_t n = logits->value.numel();
  check(n > 0, ErrorKind::shape, "bce_with_logits: empty input");
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double z = double(logits->value[i]);
    const double y = double(targets[i]);
    acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Tensor<T> out({1});
  out[0] = T(acc / double(n));
  auto t = std::make_shared<Tensor<T>>(targets);
  return ag::make_result<T>(std::move(out), {logits}, [logits, t, n](ag::Node<T>& self) {
    if (!logits->requires_grad) return;
    Tensor<T>& gx = logits->ensure_grad();
    const T g = self.grad[0] / T(n);
    for (std::int64_t i = 0; i < n; ++i) {
      const double z = double(logits->value[i]);
      const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      gx[i] += g * T(s - double((*t)[i]));
    }
  });
}

} // namespace lensid::train
