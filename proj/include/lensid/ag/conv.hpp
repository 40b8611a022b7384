#pragma once

#include <algorithm>
#include <vector>

#include "lensid/ag/autograd.hpp"
#include "lensid/core/gemm.hpp"
#include "lensid/core/resample.hpp"

namespace lensid::ag {

namespace detail {

// Elements allowed in one im2col tile buffer (64MB of float32).
inline constexpr std::int64_t kColBudget = 16 * 1024 * 1024;

/// Fill col (k_rows, (row_end-row_begin)*wo) from one sample/group of x.
/// x points at the first channel of the group, laid out (c_in, h, w).
template <class T>
void im2col(const T* x, std::int64_t c_in, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t row_begin,
            std::int64_t row_end, std::int64_t wo, T* col) {
  const std::int64_t tile_cols = (row_end - row_begin) * wo;
  for (std::int64_t c = 0; c < c_in; ++c)
    for (std::int64_t i = 0; i < kh; ++i)
      for (std::int64_t j = 0; j < kw; ++j) {
        T* dst_row = col + ((c * kh + i) * kw + j) * tile_cols;
        for (std::int64_t y = row_begin; y < row_end; ++y) {
          T* dst = dst_row + (y - row_begin) * wo;
          const std::int64_t in_y = y * stride - pad + i;
          if (in_y < 0 || in_y >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src_row = x + (c * h + in_y) * w;
          if (stride == 1) {
            const std::int64_t lo = std::clamp<std::int64_t>(pad - j, 0, wo);
            const std::int64_t hi = std::clamp<std::int64_t>(w + pad - j, 0, wo);
            std::fill(dst, dst + lo, T(0));
            if (hi > lo) std::copy(src_row + (lo - pad + j), src_row + (hi - pad + j), dst + lo);
            std::fill(dst + hi, dst + wo, T(0));
          } else {
            for (std::int64_t ox = 0; ox < wo; ++ox) {
              const std::int64_t in_x = ox * stride - pad + j;
              dst[ox] = (in_x >= 0 && in_x < w) ? src_row[in_x] : T(0);
            }
          }
        }
      }
}

/// Scatter-add col (k_rows, tile_cols) back into dx for one sample/group.
template <class T>
void col2im_acc(const T* col, std::int64_t c_in, std::int64_t h, std::int64_t w, std::int64_t kh,
                std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t row_begin,
                std::int64_t row_end, std::int64_t wo, T* dx) {
  const std::int64_t tile_cols = (row_end - row_begin) * wo;
  for (std::int64_t c = 0; c < c_in; ++c)
    for (std::int64_t i = 0; i < kh; ++i)
      for (std::int64_t j = 0; j < kw; ++j) {
        const T* src_row = col + ((c * kh + i) * kw + j) * tile_cols;
        for (std::int64_t y = row_begin; y < row_end; ++y) {
          const std::int64_t in_y = y * stride - pad + i;
          if (in_y < 0 || in_y >= h) continue;
          const T* src = src_row + (y - row_begin) * wo;
          T* dst_row = dx + (c * h + in_y) * w;
          for (std::int64_t ox = 0; ox < wo; ++ox) {
            const std::int64_t in_x = ox * stride - pad + j;
            if (in_x >= 0 && in_x < w) dst_row[in_x] += src[ox];
          }
        }
      }
}

struct ConvDims {
  std::int64_t n, c, h, w;       // input
  std::int64_t o, kh, kw;        // kernel
  std::int64_t ho, wo;           // output
  std::int64_t groups, cg, og;   // per-group channels
  std::int64_t stride, pad, k;   // k = cg*kh*kw (GEMM inner dim)
};

template <class T>
ConvDims conv_dims(const Tensor<T>& x, const Tensor<T>& w, std::int64_t stride, std::int64_t pad,
                   std::int64_t groups) {
  check(x.rank() == 4, ErrorKind::shape, "conv2d: input must be (N,C,H,W), got " + shape_str(x.shape()));
  check(w.rank() == 4, ErrorKind::shape, "conv2d: weight must be (O,C/g,kh,kw)");
  check(stride >= 1 && pad >= 0 && groups >= 1, ErrorKind::config, "conv2d: bad stride/pad/groups");
  ConvDims d;
  d.n = x.dim(0); d.c = x.dim(1); d.h = x.dim(2); d.w = x.dim(3);
  d.o = w.dim(0); d.kh = w.dim(2); d.kw = w.dim(3);
  d.groups = groups;
  check(d.c % groups == 0 && d.o % groups == 0, ErrorKind::shape,
        "conv2d: channels not divisible by groups");
  d.cg = d.c / groups;
  d.og = d.o / groups;
  check(w.dim(1) == d.cg, ErrorKind::shape, "conv2d: weight channel dim mismatch");
  d.stride = stride; d.pad = pad;
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  check(d.ho >= 1 && d.wo >= 1, ErrorKind::shape, "conv2d: kernel larger than padded input");
  d.k = d.cg * d.kh * d.kw;
  return d;
}

inline std::int64_t tile_rows_for(const ConvDims& d) {
  const std::int64_t by_budget = std::max<std::int64_t>(1, kColBudget / std::max<std::int64_t>(1, d.k * d.wo));
  return std::min(d.ho, by_budget);
}

} // namespace detail

/// 2-d convolution via im2col + GEMM. Weight (O, C/groups, kh, kw); bias (O) or
/// an empty Var for none. Output (N, O, Ho, Wo).
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::int64_t stride = 1,
              std::int64_t pad = 0, std::int64_t groups = 1) {
  const detail::ConvDims d = detail::conv_dims(x->value, w->value, stride, pad, groups);
  if (b) {
    check(b->value.rank() == 1 && b->value.dim(0) == d.o, ErrorKind::shape,
          "conv2d: bias must be (O)");
  }
  const std::int64_t tile = detail::tile_rows_for(d);
  Tensor<T> out({d.n, d.o, d.ho, d.wo});
  {
    std::vector<T> col(static_cast<std::size_t>(d.k * tile * d.wo));
    for (std::int64_t n = 0; n < d.n; ++n)
      for (std::int64_t g = 0; g < d.groups; ++g) {
        const T* xg = x->value.data() + (n * d.c + g * d.cg) * d.h * d.w;
        const T* wg = w->value.data() + g * d.og * d.k;
        for (std::int64_t rb = 0; rb < d.ho; rb += tile) {
          const std::int64_t re = std::min(d.ho, rb + tile);
          detail::im2col(xg, d.cg, d.h, d.w, d.kh, d.kw, d.stride, d.pad, rb, re, d.wo, col.data());
          T* og_out = out.data() + ((n * d.o + g * d.og) * d.ho + rb) * d.wo;
          gemm_strided_out(wg, col.data(), og_out, d.og, d.k, (re - rb) * d.wo, d.ho * d.wo);
        }
      }
    if (b) {
      const std::int64_t hw = d.ho * d.wo;
      for (std::int64_t n = 0; n < d.n; ++n)
        for (std::int64_t o = 0; o < d.o; ++o) {
          const T bv = b->value[o];
          T* p = out.data() + (n * d.o + o) * hw;
          for (std::int64_t i = 0; i < hw; ++i) p[i] += bv;
        }
    }
  }
  std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
  return make_result<T>(std::move(out), parents, [x, w, b, d, tile](Node<T>& self) {
    const std::int64_t hw = d.ho * d.wo;
    if (b && b->requires_grad) {
      Tensor<T>& gb = b->ensure_grad();
      for (std::int64_t n = 0; n < d.n; ++n)
        for (std::int64_t o = 0; o < d.o; ++o) {
          const T* p = self.grad.data() + (n * d.o + o) * hw;
          T acc = T(0);
          for (std::int64_t i = 0; i < hw; ++i) acc += p[i];
          gb[o] += acc;
        }
    }
    if (!x->requires_grad && !w->requires_grad) return;
    std::vector<T> col(static_cast<std::size_t>(d.k * tile * d.wo));
    std::vector<T> dy(static_cast<std::size_t>(d.og * tile * d.wo));
    std::vector<T> dcol(x->requires_grad ? static_cast<std::size_t>(d.k * tile * d.wo) : 0);
    for (std::int64_t n = 0; n < d.n; ++n)
      for (std::int64_t g = 0; g < d.groups; ++g) {
        const T* xg = x->value.data() + (n * d.c + g * d.cg) * d.h * d.w;
        const T* wg = w->value.data() + g * d.og * d.k;
        for (std::int64_t rb = 0; rb < d.ho; rb += tile) {
          const std::int64_t re = std::min(d.ho, rb + tile);
          const std::int64_t tc = (re - rb) * d.wo;
          for (std::int64_t o = 0; o < d.og; ++o) {
            const T* src = self.grad.data() + ((n * d.o + g * d.og + o) * d.ho + rb) * d.wo;
            std::copy(src, src + tc, dy.data() + o * tc);
          }
          if (w->requires_grad) {
            detail::im2col(xg, d.cg, d.h, d.w, d.kh, d.kw, d.stride, d.pad, rb, re, d.wo,
                           col.data());
            gemm_bt_acc(dy.data(), col.data(), w->ensure_grad().data() + g * d.og * d.k, d.og, tc,
                        d.k);
          }
          if (x->requires_grad) {
            gemm_at(wg, dy.data(), dcol.data(), d.k, d.og, tc);
            T* gxg = x->ensure_grad().data() + (n * d.c + g * d.cg) * d.h * d.w;
            detail::col2im_acc(dcol.data(), d.cg, d.h, d.w, d.kh, d.kw, d.stride, d.pad, rb, re,
                               d.wo, gxg);
          }
        }
      }
  });
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, std::int64_t stride = 1, std::int64_t pad = 0,
              std::int64_t groups = 1) {
  return conv2d(x, w, Var<T>{}, stride, pad, groups);
}

/// Max pooling with kernel k, stride s, zero-free padding (out-of-range taps
/// are simply skipped). Trailing rows/columns that do not fit a window are
/// dropped when pad == 0.
template <class T>
Var<T> max_pool2d(const Var<T>& x, std::int64_t k, std::int64_t s, std::int64_t pad = 0) {
  check(x->value.rank() == 4, ErrorKind::shape, "max_pool2d: input must be (N,C,H,W)");
  check(k >= 1 && s >= 1 && pad >= 0 && pad < k, ErrorKind::config, "max_pool2d: bad params");
  const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
  const std::int64_t h = x->value.dim(2), w = x->value.dim(3);
  const std::int64_t ho = (h + 2 * pad - k) / s + 1, wo = (w + 2 * pad - k) / s + 1;
  check(ho >= 1 && wo >= 1, ErrorKind::shape, "max_pool2d: input too small");
  Tensor<T> out({n, c, ho, wo});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(out.numel()));
  for (std::int64_t nc = 0; nc < n * c; ++nc) {
    const T* xp = x->value.data() + nc * h * w;
    T* op = out.data() + nc * ho * wo;
    std::int64_t* ap = argmax->data() + nc * ho * wo;
    for (std::int64_t y = 0; y < ho; ++y)
      for (std::int64_t xo = 0; xo < wo; ++xo) {
        std::int64_t best = -1;
        T bv = T(0);
        for (std::int64_t i = 0; i < k; ++i) {
          const std::int64_t yy = y * s - pad + i;
          if (yy < 0 || yy >= h) continue;
          for (std::int64_t j = 0; j < k; ++j) {
            const std::int64_t xx = xo * s - pad + j;
            if (xx < 0 || xx >= w) continue;
            const std::int64_t idx = yy * w + xx;
            if (best < 0 || xp[idx] > bv) { bv = xp[idx]; best = idx; }
          }
        }
        check(best >= 0, ErrorKind::shape, "max_pool2d: empty window");
        op[y * wo + xo] = bv;
        ap[y * wo + xo] = nc * h * w + best;
      }
  }
  return make_result<T>(std::move(out), {x}, [x, argmax](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& gx = x->ensure_grad();
    for (std::int64_t i = 0; i < self.grad.numel(); ++i)
      gx[(*argmax)[static_cast<std::size_t>(i)]] += self.grad[i];
  });
}

template <class T>
Var<T> max_pool2d_2x2(const Var<T>& x) {
  return max_pool2d(x, 2, 2, 0);
}

/// Average pooling, kernel k, stride s, no padding; windows fully inside.
template <class T>
Var<T> avg_pool2d(const Var<T>& x, std::int64_t k, std::int64_t s) {
  check(x->value.rank() == 4, ErrorKind::shape, "avg_pool2d: input must be (N,C,H,W)");
  const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
  const std::int64_t h = x->value.dim(2), w = x->value.dim(3);
  check(h >= k && w >= k, ErrorKind::shape, "avg_pool2d: kernel larger than input");
  const std::int64_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
  Tensor<T> out({n, c, ho, wo});
  const T inv = T(1) / T(k * k);
  for (std::int64_t nc = 0; nc < n * c; ++nc) {
    const T* xp = x->value.data() + nc * h * w;
    T* op = out.data() + nc * ho * wo;
    for (std::int64_t y = 0; y < ho; ++y)
      for (std::int64_t xo = 0; xo < wo; ++xo) {
        T acc = T(0);
        for (std::int64_t i = 0; i < k; ++i)
          for (std::int64_t j = 0; j < k; ++j) acc += xp[(y * s + i) * w + (xo * s + j)];
        op[y * wo + xo] = acc * inv;
      }
  }
  return make_result<T>(std::move(out), {x}, [x, k, s, n, c, h, w, ho, wo, inv](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& gx = x->ensure_grad();
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
      T* gp = gx.data() + nc * h * w;
      const T* op = self.grad.data() + nc * ho * wo;
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t xo = 0; xo < wo; ++xo) {
          const T g = op[y * wo + xo] * inv;
          for (std::int64_t i = 0; i < k; ++i)
            for (std::int64_t j = 0; j < k; ++j) gp[(y * s + i) * w + (xo * s + j)] += g;
        }
    }
  });
}

/// Global average pooling: (N,C,H,W) -> (N,C,1,1).
template <class T>
Var<T> global_avg_pool(const Var<T>& x) {
  check(x->value.rank() == 4, ErrorKind::shape, "global_avg_pool: input must be (N,C,H,W)");
  const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
  const std::int64_t hw = x->value.dim(2) * x->value.dim(3);
  Tensor<T> out({n, c, 1, 1});
  for (std::int64_t nc = 0; nc < n * c; ++nc) {
    double acc = 0.0;
    const T* xp = x->value.data() + nc * hw;
    for (std::int64_t i = 0; i < hw; ++i) acc += double(xp[i]);
    out[nc] = T(acc / double(hw));
  }
  return make_result<T>(std::move(out), {x}, [x, n, c, hw](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& gx = x->ensure_grad();
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
      const T g = self.grad[nc] / T(hw);
      T* gp = gx.data() + nc * hw;
      for (std::int64_t i = 0; i < hw; ++i) gp[i] += g;
    }
  });
}

/// Bilinear resize with half-pixel centers and edge clamping: (N,C,H,W) -> (N,C,oh,ow).
template <class T>
Var<T> resize_bilinear(const Var<T>& x, std::int64_t oh, std::int64_t ow) {
  check(x->value.rank() == 4, ErrorKind::shape, "resize_bilinear: input must be (N,C,H,W)");
  check(oh >= 1 && ow >= 1, ErrorKind::shape, "resize_bilinear: bad output size");
  const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
  const std::int64_t h = x->value.dim(2), w = x->value.dim(3);
  auto ay = std::make_shared<LerpAxis>(lerp_axis(h, oh));
  auto ax = std::make_shared<LerpAxis>(lerp_axis(w, ow));
  Tensor<T> out({n, c, oh, ow});
  for (std::int64_t nc = 0; nc < n * c; ++nc) {
    const T* xp = x->value.data() + nc * h * w;
    T* op = out.data() + nc * oh * ow;
    for (std::int64_t y = 0; y < oh; ++y) {
      const std::int64_t y0 = ay->i0[static_cast<std::size_t>(y)];
      const std::int64_t y1 = ay->i1[static_cast<std::size_t>(y)];
      const double fy = ay->frac[static_cast<std::size_t>(y)];
      for (std::int64_t xo = 0; xo < ow; ++xo) {
        const std::int64_t x0 = ax->i0[static_cast<std::size_t>(xo)];
        const std::int64_t x1 = ax->i1[static_cast<std::size_t>(xo)];
        const double fx = ax->frac[static_cast<std::size_t>(xo)];
        const double top = double(xp[y0 * w + x0]) * (1.0 - fx) + double(xp[y0 * w + x1]) * fx;
        const double bot = double(xp[y1 * w + x0]) * (1.0 - fx) + double(xp[y1 * w + x1]) * fx;
        op[y * ow + xo] = T(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return make_result<T>(std::move(out), {x}, [x, ay, ax, n, c, h, w, oh, ow](Node<T>& self) {
    if (!x->requires_grad) return;
    Tensor<T>& gx = x->ensure_grad();
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
      T* gp = gx.data() + nc * h * w;
      const T* op = self.grad.data() + nc * oh * ow;
      for (std::int64_t y = 0; y < oh; ++y) {
        const std::int64_t y0 = ay->i0[static_cast<std::size_t>(y)];
        const std::int64_t y1 = ay->i1[static_cast<std::size_t>(y)];
        const double fy = ay->frac[static_cast<std::size_t>(y)];
        for (std::int64_t xo = 0; xo < ow; ++xo) {
          const std::int64_t x0 = ax->i0[static_cast<std::size_t>(xo)];
          const std::int64_t x1 = ax->i1[static_cast<std::size_t>(xo)];
          const double fx = ax->frac[static_cast<std::size_t>(xo)];
          const double g = double(op[y * ow + xo]);
          gp[y0 * w + x0] += T(g * (1.0 - fy) * (1.0 - fx));
          gp[y0 * w + x1] += T(g * (1.0 - fy) * fx);
          gp[y1 * w + x0] += T(g * fy * (1.0 - fx));
          gp[y1 * w + x1] += T(g * fy * fx);
        }
      }
    }
  });
}

} // namespace lensid::ag
