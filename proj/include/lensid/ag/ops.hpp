#pragma once

#include <cmath>

#include "lensid/ag/autograd.hpp"
#include "lensid/core/gemm.hpp"

namespace lensid::ag {

// ---------------------------------------------------------------- elementwise

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check(a->value.same_shape(b->value), ErrorKind::shape, "add: shape mismatch");
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a->requires_grad) a->accumulate(self.grad);
    if (b->requires_grad) b->accumulate(self.grad);
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check(a->value.same_shape(b->value), ErrorKind::shape, "mul: shape mismatch");
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a->requires_grad) {
      Tensor<T>& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) ga[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor<T>& gb = b->ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) gb[i] += self.grad[i] * a->value[i];
    }
  });
}

template <class T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  check(a->value.same_shape(b->value), ErrorKind::shape, "div: shape mismatch");
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] / b->value[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (a->requires_grad) {
      Tensor<T>& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) ga[i] += self.grad[i] / b->value[i];
    }
    if (b->requires_grad) {
      Tensor<T>& gb = b->ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i)
        gb[i] -= self.grad[i] * a->value[i] / (b->value[i] * b->value[i]);
    }
  });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
  return make_result<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (a->requires_grad) a->accumulate(self.grad);
  });
}

template <class T>
Var<T> mul_scalar(const Var<T>& a, T s) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
  return make_result<T>(std::move(out), {a}, [a, s](Node<T>& self) {
    if (a->requires_grad) {
      Tensor<T>& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) ga[i] += self.grad[i] * s;
    }
  });
}

template <class T>
Var<T> neg(const Var<T>& a) { return mul_scalar(a, T(-1)); }

template <class T>
Var<T> log_e(const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(a->value[i]);
  return make_result<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) ga[i] += self.grad[i] / a->value[i];
  });
}

template <class T>
Var<T> log2(const Var<T>& a) {
  return mul_scalar(log_e(a), T(1.4426950408889634074)); // 1/ln(2)
}

template <class T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] > T(0) ? a->value[i] : T(0);
  return make_result<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i)
      if (a->value[i] > T(0)) ga[i] += self.grad[i];
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const T x = a->value[i];
    out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  }
  auto result = make_result<T>(std::move(out), {a}, nullptr);
  if (result->requires_grad) {
    result->backward_fn = [a](Node<T>& self) {
      if (!a->requires_grad) return;
      Tensor<T>& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
        const T y = self.value[i];
        ga[i] += self.grad[i] * y * (T(1) - y);
      }
    };
  }
  return result;
}

template <class T>
Var<T> tanh_op(const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->value[i]);
  auto result = make_result<T>(std::move(out), {a}, nullptr);
  if (result->requires_grad) {
    result->backward_fn = [a](Node<T>& self) {
      if (!a->requires_grad) return;
      Tensor<T>& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < self.grad.numel(); ++i) {
        const T y = self.value[i];
        ga[i] += self.grad[i] * (T(1) - y * y);
      }
    };
  }
  return result;
}

/// clamp(x, lo, hi); zero gradient outside the open interval.
template <class T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[i] = std::min(hi, std::max(lo, a->value[i]));
  return make_result<T>(std::move(out), {a}, [a, lo, hi](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i)
      if (a->value[i] > lo && a->value[i] < hi) ga[i] += self.grad[i];
  });
}

/// Hard tanh: clamp to [-1, 1].
template <class T>
Var<T> hard_tanh(const Var<T>& a) { return clamp(a, T(-1), T(1)); }

template <class T>
Var<T> dropout(const Var<T>& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  check(rate < 1.0, ErrorKind::config, "dropout rate must be < 1");
  auto mask = std::make_shared<std::vector<T>>(static_cast<std::size_t>(a->value.numel()));
  const T scale = T(1.0 / (1.0 - rate));
  Tensor<T> out(a->value.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const T m = rng.bernoulli(rate) ? T(0) : scale;
    (*mask)[static_cast<std::size_t>(i)] = m;
    out[i] = a->value[i] * m;
  }
  return make_result<T>(std::move(out), {a}, [a, mask](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i)
      ga[i] += self.grad[i] * (*mask)[static_cast<std::size_t>(i)];
  });
}

// ---------------------------------------------------------------- reductions

template <class T>
Var<T> sum_all(const Var<T>& a) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a->value.numel(); ++i) acc += double(a->value[i]);
  return make_result<T>(Tensor<T>::scalar(T(acc)), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    const T g = self.grad[0];
    for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
  const std::int64_t n = a->value.numel();
  check(n > 0, ErrorKind::shape, "mean of empty tensor");
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += double(a->value[i]);
  return make_result<T>(Tensor<T>::scalar(T(acc / double(n))), {a}, [a, n](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    const T g = self.grad[0] / T(n);
    for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

// ------------------------------------------------------------------- shaping

template <class T>
Var<T> reshape(const Var<T>& a, Shape new_shape) {
  Tensor<T> out = a->value.reshaped(std::move(new_shape));
  return make_result<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i) ga[i] += self.grad[i];
  });
}

namespace detail {
// Decompose a rank >= 2 tensor as (outer, mid, inner) around axis 1.
template <class T>
void axis1_dims(const Tensor<T>& t, std::int64_t& outer, std::int64_t& mid, std::int64_t& inner) {
  check(t.rank() >= 2, ErrorKind::shape, "axis-1 op needs rank >= 2");
  outer = t.dim(0);
  mid = t.dim(1);
  inner = 1;
  for (int i = 2; i < t.rank(); ++i) inner *= t.dim(i);
}
} // namespace detail

/// Concatenate along dim 1. All inputs must agree on every other dim.
template <class T>
Var<T> concat_axis1(const std::vector<Var<T>>& xs) {
  check(!xs.empty(), ErrorKind::shape, "concat of nothing");
  std::int64_t outer, mid0, inner;
  detail::axis1_dims(xs[0]->value, outer, mid0, inner);
  std::int64_t mid_total = 0;
  for (const auto& x : xs) {
    std::int64_t o, m, in;
    detail::axis1_dims(x->value, o, m, in);
    check(o == outer && in == inner, ErrorKind::shape, "concat: incompatible shapes");
    mid_total += m;
  }
  Shape out_shape = xs[0]->value.shape();
  out_shape[1] = mid_total;
  Tensor<T> out(out_shape);
  std::int64_t offset = 0;
  for (const auto& x : xs) {
    const std::int64_t m = x->value.dim(1);
    for (std::int64_t o = 0; o < outer; ++o) {
      const T* src = x->value.data() + (o * m) * inner;
      T* dst = out.data() + (o * mid_total + offset) * inner;
      std::copy(src, src + m * inner, dst);
    }
    offset += m;
  }
  return make_result<T>(std::move(out), xs, [xs, outer, mid_total, inner](Node<T>& self) {
    std::int64_t offset = 0;
    for (const auto& x : xs) {
      const std::int64_t m = x->value.dim(1);
      if (x->requires_grad) {
        Tensor<T>& gx = x->ensure_grad();
        for (std::int64_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + (o * mid_total + offset) * inner;
          T* dst = gx.data() + (o * m) * inner;
          for (std::int64_t i = 0; i < m * inner; ++i) dst[i] += src[i];
        }
      }
      offset += m;
    }
  });
}

template <class T>
Var<T> concat_axis1(const Var<T>& a, const Var<T>& b) {
  return concat_axis1<T>(std::vector<Var<T>>{a, b});
}

/// Slice [from, to) along dim 1.
template <class T>
Var<T> slice_axis1(const Var<T>& a, std::int64_t from, std::int64_t to) {
  std::int64_t outer, mid, inner;
  detail::axis1_dims(a->value, outer, mid, inner);
  check(0 <= from && from < to && to <= mid, ErrorKind::shape, "slice_axis1: bad range");
  Shape out_shape = a->value.shape();
  out_shape[1] = to - from;
  Tensor<T> out(out_shape);
  const std::int64_t m = to - from;
  for (std::int64_t o = 0; o < outer; ++o) {
    const T* src = a->value.data() + (o * mid + from) * inner;
    std::copy(src, src + m * inner, out.data() + o * m * inner);
  }
  return make_result<T>(std::move(out), {a}, [a, outer, mid, inner, from, m](Node<T>& self) {
    if (!a->requires_grad) return;
    Tensor<T>& ga = a->ensure_grad();
    for (std::int64_t o = 0; o < outer; ++o) {
      const T* src = self.grad.data() + o * m * inner;
      T* dst = ga.data() + (o * mid + from) * inner;
      for (std::int64_t i = 0; i < m * inner; ++i) dst[i] += src[i];
    }
  });
}

/// Depth-wise interleave of B same-shape inputs along dim 1:
/// out[:, B*c + j, ...] = xs[j][:, c, ...].
template <class T>
Var<T> interleave_axis1(const std::vector<Var<T>>& xs) {
  check(xs.size() >= 2, ErrorKind::shape, "interleave needs >= 2 inputs");
  std::int64_t outer, mid, inner;
  detail::axis1_dims(xs[0]->value, outer, mid, inner);
  for (const auto& x : xs)
    check(x->value.same_shape(xs[0]->value), ErrorKind::shape, "interleave: shape mismatch");
  const std::int64_t B = static_cast<std::int64_t>(xs.size());
  Shape out_shape = xs[0]->value.shape();
  out_shape[1] = mid * B;
  Tensor<T> out(out_shape);
  for (std::int64_t j = 0; j < B; ++j) {
    const auto& x = xs[static_cast<std::size_t>(j)]->value;
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t c = 0; c < mid; ++c) {
        const T* src = x.data() + (o * mid + c) * inner;
        T* dst = out.data() + (o * mid * B + B * c + j) * inner;
        std::copy(src, src + inner, dst);
      }
  }
  return make_result<T>(std::move(out), xs, [xs, outer, mid, inner, B](Node<T>& self) {
    for (std::int64_t j = 0; j < B; ++j) {
      const auto& x = xs[static_cast<std::size_t>(j)];
      if (!x->requires_grad) continue;
      Tensor<T>& gx = x->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t c = 0; c < mid; ++c) {
          const T* src = self.grad.data() + (o * mid * B + B * c + j) * inner;
          T* dst = gx.data() + (o * mid + c) * inner;
          for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
    }
  });
}

// ------------------------------------------------------------------- softmax

/// Softmax along dim 1, independently per (outer, inner) position.
template <class T>
Var<T> softmax_axis1(const Var<T>& a) {
  std::int64_t outer, mid, inner;
  detail::axis1_dims(a->value, outer, mid, inner);
  Tensor<T> out(a->value.shape());
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t i = 0; i < inner; ++i) {
      T mx = a->value[(o * mid) * inner + i];
      for (std::int64_t c = 1; c < mid; ++c)
        mx = std::max(mx, a->value[(o * mid + c) * inner + i]);
      double denom = 0.0;
      for (std::int64_t c = 0; c < mid; ++c) {
        const T e = std::exp(a->value[(o * mid + c) * inner + i] - mx);
        out[(o * mid + c) * inner + i] = e;
        denom += double(e);
      }
      for (std::int64_t c = 0; c < mid; ++c)
        out[(o * mid + c) * inner + i] = T(double(out[(o * mid + c) * inner + i]) / denom);
    }
  auto result = make_result<T>(std::move(out), {a}, nullptr);
  if (result->requires_grad) {
    result->backward_fn = [a, outer, mid, inner](Node<T>& self) {
      if (!a->requires_grad) return;
      Tensor<T>& ga = a->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t i = 0; i < inner; ++i) {
          double dot = 0.0;
          for (std::int64_t c = 0; c < mid; ++c) {
            const std::int64_t idx = (o * mid + c) * inner + i;
            dot += double(self.grad[idx]) * double(self.value[idx]);
          }
          for (std::int64_t c = 0; c < mid; ++c) {
            const std::int64_t idx = (o * mid + c) * inner + i;
            ga[idx] += self.value[idx] * (self.grad[idx] - T(dot));
          }
        }
    };
  }
  return result;
}

/// Multiply a (N,1,H,W) weight map into a (N,D,H,W) feature map.
template <class T>
Var<T> broadcast_mul_c1(const Var<T>& w, const Var<T>& x) {
  std::int64_t outer, d, inner;
  detail::axis1_dims(x->value, outer, d, inner);
  check(w->value.rank() == x->value.rank() && w->value.dim(0) == outer && w->value.dim(1) == 1,
        ErrorKind::shape, "broadcast_mul_c1: weight must be (N,1,...)");
  std::int64_t wo, wm, winner;
  detail::axis1_dims(w->value, wo, wm, winner);
  check(winner == inner, ErrorKind::shape, "broadcast_mul_c1: spatial mismatch");
  Tensor<T> out(x->value.shape());
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t c = 0; c < d; ++c) {
      const T* wp = w->value.data() + o * inner;
      const T* xp = x->value.data() + (o * d + c) * inner;
      T* op = out.data() + (o * d + c) * inner;
      for (std::int64_t i = 0; i < inner; ++i) op[i] = wp[i] * xp[i];
    }
  return make_result<T>(std::move(out), {w, x}, [w, x, outer, d, inner](Node<T>& self) {
    if (w->requires_grad) {
      Tensor<T>& gw = w->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t c = 0; c < d; ++c) {
          const T* gp = self.grad.data() + (o * d + c) * inner;
          const T* xp = x->value.data() + (o * d + c) * inner;
          T* dst = gw.data() + o * inner;
          for (std::int64_t i = 0; i < inner; ++i) dst[i] += gp[i] * xp[i];
        }
    }
    if (x->requires_grad) {
      Tensor<T>& gx = x->ensure_grad();
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t c = 0; c < d; ++c) {
          const T* gp = self.grad.data() + (o * d + c) * inner;
          const T* wp = w->value.data() + o * inner;
          T* dst = gx.data() + (o * d + c) * inner;
          for (std::int64_t i = 0; i < inner; ++i) dst[i] += gp[i] * wp[i];
        }
    }
  });
}

/// Gather per-pixel probabilities of the labelled class:
/// probs (N,K,H,W), labels (N,H,W) -> (N,H,W).
template <class T>
Var<T> select_index1(const Var<T>& probs, const Tensor<std::int32_t>& labels) {
  check(probs->value.rank() == 4, ErrorKind::shape, "select_index1: probs must be (N,K,H,W)");
  const std::int64_t n = probs->value.dim(0), k = probs->value.dim(1);
  const std::int64_t inner = probs->value.dim(2) * probs->value.dim(3);
  check(labels.rank() == 3 && labels.dim(0) == n && labels.dim(1) == probs->value.dim(2) &&
            labels.dim(2) == probs->value.dim(3),
        ErrorKind::shape, "select_index1: label shape mismatch");
  Tensor<T> out({n, probs->value.dim(2), probs->value.dim(3)});
  for (std::int64_t o = 0; o < n; ++o)
    for (std::int64_t i = 0; i < inner; ++i) {
      const std::int32_t c = labels[o * inner + i];
      check(c >= 0 && c < k, ErrorKind::validation, "label out of class range");
      out[o * inner + i] = probs->value[(o * k + c) * inner + i];
    }
  auto labels_copy = std::make_shared<Tensor<std::int32_t>>(labels);
  return make_result<T>(std::move(out), {probs}, [probs, labels_copy, n, k, inner](Node<T>& self) {
    if (!probs->requires_grad) return;
    Tensor<T>& gp = probs->ensure_grad();
    for (std::int64_t o = 0; o < n; ++o)
      for (std::int64_t i = 0; i < inner; ++i) {
        const std::int32_t c = (*labels_copy)[o * inner + i];
        gp[(o * k + c) * inner + i] += self.grad[o * inner + i];
      }
  });
}

// -------------------------------------------------------------- dense algebra

/// (N,F) x (F,O) -> (N,O)
template <class T>
Var<T> matmul(const Var<T>& x, const Var<T>& w) {
  check(x->value.rank() == 2 && w->value.rank() == 2 && x->value.dim(1) == w->value.dim(0),
        ErrorKind::shape, "matmul: incompatible shapes");
  const std::int64_t n = x->value.dim(0), f = x->value.dim(1), o = w->value.dim(1);
  Tensor<T> out({n, o});
  gemm(x->value.data(), w->value.data(), out.data(), n, f, o);
  return make_result<T>(std::move(out), {x, w}, [x, w, n, f, o](Node<T>& self) {
    if (x->requires_grad)
      gemm_bt_acc(self.grad.data(), w->value.data(), x->ensure_grad().data(), n, o, f);
    if (w->requires_grad)
      gemm_at_acc(x->value.data(), self.grad.data(), w->ensure_grad().data(), f, n, o);
  });
}

/// Add a length-O bias row vector to each row of (N,O).
template <class T>
Var<T> add_rowvec(const Var<T>& x, const Var<T>& b) {
  check(x->value.rank() == 2 && b->value.rank() == 1 && b->value.dim(0) == x->value.dim(1),
        ErrorKind::shape, "add_rowvec: incompatible shapes");
  const std::int64_t n = x->value.dim(0), o = x->value.dim(1);
  Tensor<T> out({n, o});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < o; ++j) out(i, j) = x->value(i, j) + b->value[j];
  return make_result<T>(std::move(out), {x, b}, [x, b, n, o](Node<T>& self) {
    if (x->requires_grad) x->accumulate(self.grad);
    if (b->requires_grad) {
      Tensor<T>& gb = b->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < o; ++j) gb[j] += self.grad(i, j);
    }
  });
}

// ---------------------------------------------------------------- time slices

/// x (N,T,F) -> (N,F) at step t.
template <class T>
Var<T> slice_time(const Var<T>& x, std::int64_t t) {
  check(x->value.rank() == 3, ErrorKind::shape, "slice_time: need (N,T,F)");
  const std::int64_t n = x->value.dim(0), steps = x->value.dim(1), f = x->value.dim(2);
  check(t >= 0 && t < steps, ErrorKind::shape, "slice_time: t out of range");
  Tensor<T> out({n, f});
  for (std::int64_t i = 0; i < n; ++i) {
    const T* src = x->value.data() + (i * steps + t) * f;
    std::copy(src, src + f, out.data() + i * f);
  }
  return make_result<T>(std::move(out), {x}, [x, t, n, steps, f](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& gx = x->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
      const T* src = self.grad.data() + i * f;
      T* dst = gx.data() + (i * steps + t) * f;
      for (std::int64_t j = 0; j < f; ++j) dst[j] += src[j];
    }
  });
}

/// Stack T tensors of (N,F) into (N,T,F).
template <class T>
Var<T> stack_time(const std::vector<Var<T>>& steps) {
  check(!steps.empty(), ErrorKind::shape, "stack_time of nothing");
  const std::int64_t n = steps[0]->value.dim(0), f = steps[0]->value.dim(1);
  const std::int64_t tcount = static_cast<std::int64_t>(steps.size());
  for (const auto& s : steps)
    check(s->value.rank() == 2 && s->value.dim(0) == n && s->value.dim(1) == f, ErrorKind::shape,
          "stack_time: shape mismatch");
  Tensor<T> out({n, tcount, f});
  for (std::int64_t t = 0; t < tcount; ++t)
    for (std::int64_t i = 0; i < n; ++i) {
      const T* src = steps[static_cast<std::size_t>(t)]->value.data() + i * f;
      std::copy(src, src + f, out.data() + (i * tcount + t) * f);
    }
  return make_result<T>(std::move(out), steps, [steps, n, tcount, f](Node<T>& self) {
    for (std::int64_t t = 0; t < tcount; ++t) {
      const auto& s = steps[static_cast<std::size_t>(t)];
      if (!s->requires_grad) continue;
      Tensor<T>& gs = s->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) {
        const T* src = self.grad.data() + (i * tcount + t) * f;
        T* dst = gs.data() + i * f;
        for (std::int64_t j = 0; j < f; ++j) dst[j] += src[j];
      }
    }
  });
}

} // namespace lensid::ag
