#pragma once

#include <cmath>
#include <vector>

#include "lensid/ag/autograd.hpp"

namespace lensid::ag {

/// Layer normalization over the (C,H,W) features of each sample, with a
/// per-channel affine (gamma, beta of shape (C)).
template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-5) {
  check(x->value.rank() == 4, ErrorKind::shape, "layer_norm: input must be (N,C,H,W)");
  const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
  const std::int64_t hw = x->value.dim(2) * x->value.dim(3);
  const std::int64_t m = c * hw;
  check(gamma->value.rank() == 1 && gamma->value.dim(0) == c && beta->value.same_shape(gamma->value),
        ErrorKind::shape, "layer_norm: affine params must be (C)");
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  auto mean = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
  Tensor<T> out(x->value.shape());
  for (std::int64_t s = 0; s < n; ++s) {
    const T* xp = x->value.data() + s * m;
    double mu = 0.0;
    for (std::int64_t i = 0; i < m; ++i) mu += double(xp[i]);
    mu /= double(m);
    double var = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double dxi = double(xp[i]) - mu;
      var += dxi * dxi;
    }
    var /= double(m);
    const double is = 1.0 / std::sqrt(var + eps);
    (*mean)[static_cast<std::size_t>(s)] = mu;
    (*inv_std)[static_cast<std::size_t>(s)] = is;
    T* op = out.data() + s * m;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double g = double(gamma->value[ch]), b = double(beta->value[ch]);
      for (std::int64_t i = 0; i < hw; ++i) {
        const std::int64_t idx = ch * hw + i;
        op[idx] = T((double(xp[idx]) - mu) * is * g + b);
      }
    }
  }
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [x, gamma, beta, mean, inv_std, n, c, hw, m](Node<T>& self) {
    for (std::int64_t s = 0; s < n; ++s) {
      const T* xp = x->value.data() + s * m;
      const T* gp = self.grad.data() + s * m;
      const double mu = (*mean)[static_cast<std::size_t>(s)];
      const double is = (*inv_std)[static_cast<std::size_t>(s)];
      if (gamma->requires_grad || beta->requires_grad) {
        Tensor<T>& gg = gamma->ensure_grad();
        Tensor<T>& gb = beta->ensure_grad();
        for (std::int64_t ch = 0; ch < c; ++ch) {
          double sg = 0.0, sb = 0.0;
          for (std::int64_t i = 0; i < hw; ++i) {
            const std::int64_t idx = ch * hw + i;
            const double xhat = (double(xp[idx]) - mu) * is;
            sg += double(gp[idx]) * xhat;
            sb += double(gp[idx]);
          }
          if (gamma->requires_grad) gg[ch] += T(sg);
          if (beta->requires_grad) gb[ch] += T(sb);
        }
      }
      if (x->requires_grad) {
        // dx = is * (ghat - mean(ghat) - xhat * mean(ghat * xhat)),
        // ghat = g * gamma_c
        double s1 = 0.0, s2 = 0.0;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double ga = double(gamma->value[ch]);
          for (std::int64_t i = 0; i < hw; ++i) {
            const std::int64_t idx = ch * hw + i;
            const double gh = double(gp[idx]) * ga;
            s1 += gh;
            s2 += gh * (double(xp[idx]) - mu) * is;
          }
        }
        s1 /= double(m);
        s2 /= double(m);
        Tensor<T>& gx = x->ensure_grad();
        T* gxp = gx.data() + s * m;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double ga = double(gamma->value[ch]);
          for (std::int64_t i = 0; i < hw; ++i) {
            const std::int64_t idx = ch * hw + i;
            const double gh = double(gp[idx]) * ga;
            const double xhat = (double(xp[idx]) - mu) * is;
            gxp[idx] += T(is * (gh - s1 - xhat * s2));
          }
        }
      }
    }
  });
}

/// Batch normalization over (N,H,W) per channel. In training mode the batch
/// statistics are used and running stats (plain tensors) are updated in
/// place; in eval mode the running stats are used.
template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                  double momentum = 0.1, double eps = 1e-5) {
  check(x->value.rank() == 4, ErrorKind::shape, "batch_norm: input must be (N,C,H,W)");
  const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
  const std::int64_t hw = x->value.dim(2) * x->value.dim(3);
  const std::int64_t m = n * hw;
  check(gamma->value.rank() == 1 && gamma->value.dim(0) == c, ErrorKind::shape,
        "batch_norm: affine params must be (C)");
  auto mu = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c));
  auto is = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    if (training) {
      for (std::int64_t s = 0; s < n; ++s) {
        const T* xp = x->value.data() + (s * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) mean += double(xp[i]);
      }
      mean /= double(m);
      for (std::int64_t s = 0; s < n; ++s) {
        const T* xp = x->value.data() + (s * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          const double d = double(xp[i]) - mean;
          var += d * d;
        }
      }
      var /= double(m);
      running_mean[ch] = T((1.0 - momentum) * double(running_mean[ch]) + momentum * mean);
      running_var[ch] = T((1.0 - momentum) * double(running_var[ch]) + momentum * var);
    } else {
      mean = double(running_mean[ch]);
      var = double(running_var[ch]);
    }
    (*mu)[static_cast<std::size_t>(ch)] = mean;
    (*is)[static_cast<std::size_t>(ch)] = 1.0 / std::sqrt(var + eps);
  }
  Tensor<T> out(x->value.shape());
  for (std::int64_t s = 0; s < n; ++s)
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const T* xp = x->value.data() + (s * c + ch) * hw;
      T* op = out.data() + (s * c + ch) * hw;
      const double mean = (*mu)[static_cast<std::size_t>(ch)];
      const double isv = (*is)[static_cast<std::size_t>(ch)];
      const double g = double(gamma->value[ch]), b = double(beta->value[ch]);
      for (std::int64_t i = 0; i < hw; ++i) op[i] = T((double(xp[i]) - mean) * isv * g + b);
    }
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [x, gamma, beta, mu, is, training, n, c, hw, m](Node<T>& self) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const double mean = (*mu)[static_cast<std::size_t>(ch)];
      const double isv = (*is)[static_cast<std::size_t>(ch)];
      double sg = 0.0, sb = 0.0;
      for (std::int64_t s = 0; s < n; ++s) {
        const T* xp = x->value.data() + (s * c + ch) * hw;
        const T* gp = self.grad.data() + (s * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          sg += double(gp[i]) * (double(xp[i]) - mean) * isv;
          sb += double(gp[i]);
        }
      }
      if (gamma->requires_grad) gamma->ensure_grad()[ch] += T(sg);
      if (beta->requires_grad) beta->ensure_grad()[ch] += T(sb);
      if (!x->requires_grad) continue;
      Tensor<T>& gx = x->ensure_grad();
      const double ga = double(gamma->value[ch]);
      if (training) {
        const double m1 = sb / double(m);   // mean of raw grads
        const double m2 = sg / double(m);   // mean of grad * xhat
        for (std::int64_t s = 0; s < n; ++s) {
          const T* xp = x->value.data() + (s * c + ch) * hw;
          const T* gp = self.grad.data() + (s * c + ch) * hw;
          T* gxp = gx.data() + (s * c + ch) * hw;
          for (std::int64_t i = 0; i < hw; ++i) {
            const double xhat = (double(xp[i]) - mean) * isv;
            gxp[i] += T(ga * isv * (double(gp[i]) - m1 - xhat * m2));
          }
        }
      } else {
        for (std::int64_t s = 0; s < n; ++s) {
          const T* gp = self.grad.data() + (s * c + ch) * hw;
          T* gxp = gx.data() + (s * c + ch) * hw;
          for (std::int64_t i = 0; i < hw; ++i) gxp[i] += T(ga * isv * double(gp[i]));
        }
      }
    }
  });
}

} // namespace lensid::ag
