#pragma once

#include <cmath>
#include <vector>

#include "lensid/ag/conv.hpp"

namespace lensid::ag {

namespace detail {

// Bilinear sampling kernel with zero outside the border: contributions from
// the (up to) four integer neighbours of (py, px), each weighted by
// max(0, 1-|dy|) * max(0, 1-|dx|).
struct Corner {
  std::int64_t idx;  // y*w + x, or -1 if out of range
  double wgt;
  double dy;  // d(wgt)/d(py)
  double dx;  // d(wgt)/d(px)
};

inline void corners4(double py, double px, std::int64_t h, std::int64_t w, Corner out[4]) {
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor(py));
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor(px));
  const double fy = py - double(y0), fx = px - double(x0);
  const double wy[2] = {1.0 - fy, fy};
  const double wx[2] = {1.0 - fx, fx};
  const double dwy[2] = {-1.0, 1.0};
  const double dwx[2] = {-1.0, 1.0};
  int k = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const std::int64_t yy = y0 + a, xx = x0 + b;
      Corner& c = out[k++];
      if (yy >= 0 && yy < h && xx >= 0 && xx < w) {
        c.idx = yy * w + xx;
        c.wgt = wy[a] * wx[b];
        c.dy = dwy[a] * wx[b];
        c.dx = wy[a] * dwx[b];
      } else {
        c.idx = -1;
        c.wgt = c.dy = c.dx = 0.0;
      }
    }
}

/// im2col with per-position offsets. x is one sample (c, h, w); off is that
/// sample's offset block (2*kh*kw, ho, wo). Rows of col are (c*kh+i)*kw+j.
template <class T>
void deform_im2col(const T* x, const T* off, std::int64_t c_in, std::int64_t h, std::int64_t w,
                   std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad,
                   std::int64_t row_begin, std::int64_t row_end, std::int64_t ho, std::int64_t wo,
                   T* col) {
  const std::int64_t tile_cols = (row_end - row_begin) * wo;
  const std::int64_t hw = h * w;
  for (std::int64_t i = 0; i < kh; ++i)
    for (std::int64_t j = 0; j < kw; ++j) {
      const std::int64_t t = i * kw + j;
      const T* off_y = off + (2 * t) * ho * wo;
      const T* off_x = off + (2 * t + 1) * ho * wo;
      for (std::int64_t y = row_begin; y < row_end; ++y)
        for (std::int64_t xo = 0; xo < wo; ++xo) {
          const std::int64_t opos = y * wo + xo;
          const std::int64_t pos = (y - row_begin) * wo + xo;
          const double py = double(y * stride - pad + i) + double(off_y[opos]);
          const double px = double(xo * stride - pad + j) + double(off_x[opos]);
          Corner cs[4];
          corners4(py, px, h, w, cs);
          for (std::int64_t c = 0; c < c_in; ++c) {
            const T* xc = x + c * hw;
            double v = 0.0;
            for (const Corner& cr : cs)
              if (cr.idx >= 0) v += cr.wgt * double(xc[cr.idx]);
            col[((c * kh + i) * kw + j) * tile_cols + pos] = T(v);
          }
        }
    }
}

} // namespace detail

/// Deformable 2-d convolution. Offsets (N, 2*kh*kw, Ho, Wo) displace each
/// kernel tap's sampling point; channel 2t holds the vertical shift of tap t
/// (row-major over the kernel window) and 2t+1 the horizontal shift. Sampling
/// is bilinear with zero outside the border. With all offsets zero this
/// reduces exactly to conv2d.
template <class T>
Var<T> deform_conv2d(const Var<T>& x, const Var<T>& offsets, const Var<T>& w, const Var<T>& b,
                     std::int64_t stride = 1, std::int64_t pad = 0) {
  const detail::ConvDims d = detail::conv_dims(x->value, w->value, stride, pad, 1);
  check(offsets->value.rank() == 4 && offsets->value.dim(0) == d.n &&
            offsets->value.dim(1) == 2 * d.kh * d.kw && offsets->value.dim(2) == d.ho &&
            offsets->value.dim(3) == d.wo,
        ErrorKind::shape, "deform_conv2d: offsets must be (N, 2*kh*kw, Ho, Wo)");
  if (b) {
    check(b->value.rank() == 1 && b->value.dim(0) == d.o, ErrorKind::shape,
          "deform_conv2d: bias must be (O)");
  }
  const std::int64_t tile = detail::tile_rows_for(d);
  const std::int64_t off_block = 2 * d.kh * d.kw * d.ho * d.wo;
  Tensor<T> out({d.n, d.o, d.ho, d.wo});
  {
    std::vector<T> col(static_cast<std::size_t>(d.k * tile * d.wo));
    for (std::int64_t n = 0; n < d.n; ++n) {
      const T* xs = x->value.data() + n * d.c * d.h * d.w;
      const T* os = offsets->value.data() + n * off_block;
      for (std::int64_t rb = 0; rb < d.ho; rb += tile) {
        const std::int64_t re = std::min(d.ho, rb + tile);
        detail::deform_im2col(xs, os, d.c, d.h, d.w, d.kh, d.kw, d.stride, d.pad, rb, re, d.ho,
                              d.wo, col.data());
        T* op = out.data() + (n * d.o * d.ho + rb) * d.wo;
        gemm_strided_out(w->value.data(), col.data(), op, d.o, d.k, (re - rb) * d.wo,
                         d.ho * d.wo);
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
  std::vector<Var<T>> parents{x, offsets, w};
  if (b) parents.push_back(b);
  return make_result<T>(std::move(out), parents, [x, offsets, w, b, d, tile,
                                                  off_block](Node<T>& self) {
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
    const bool need_x = x->requires_grad, need_off = offsets->requires_grad,
               need_w = w->requires_grad;
    if (!need_x && !need_off && !need_w) return;
    std::vector<T> col(need_w ? static_cast<std::size_t>(d.k * tile * d.wo) : 0);
    std::vector<T> dy(static_cast<std::size_t>(d.o * tile * d.wo));
    std::vector<T> dcol((need_x || need_off) ? static_cast<std::size_t>(d.k * tile * d.wo) : 0);
    for (std::int64_t n = 0; n < d.n; ++n) {
      const T* xs = x->value.data() + n * d.c * d.h * d.w;
      const T* os = offsets->value.data() + n * off_block;
      for (std::int64_t rb = 0; rb < d.ho; rb += tile) {
        const std::int64_t re = std::min(d.ho, rb + tile);
        const std::int64_t tc = (re - rb) * d.wo;
        for (std::int64_t o = 0; o < d.o; ++o) {
          const T* src = self.grad.data() + ((n * d.o + o) * d.ho + rb) * d.wo;
          std::copy(src, src + tc, dy.data() + o * tc);
        }
        if (need_w) {
          detail::deform_im2col(xs, os, d.c, d.h, d.w, d.kh, d.kw, d.stride, d.pad, rb, re, d.ho,
                                d.wo, col.data());
          gemm_bt_acc(dy.data(), col.data(), w->ensure_grad().data(), d.o, tc, d.k);
        }
        if (!need_x && !need_off) continue;
        gemm_at(w->value.data(), dy.data(), dcol.data(), d.k, d.o, tc);
        T* gx = need_x ? x->ensure_grad().data() + n * d.c * d.h * d.w : nullptr;
        T* goff = need_off ? offsets->ensure_grad().data() + n * off_block : nullptr;
        const std::int64_t ihw = d.h * d.w;
        for (std::int64_t i = 0; i < d.kh; ++i)
          for (std::int64_t j = 0; j < d.kw; ++j) {
            const std::int64_t t = i * d.kw + j;
            const T* off_y = os + (2 * t) * hw;
            const T* off_x = os + (2 * t + 1) * hw;
            for (std::int64_t y = rb; y < re; ++y)
              for (std::int64_t xo = 0; xo < d.wo; ++xo) {
                const std::int64_t opos = y * d.wo + xo;
                const std::int64_t pos = (y - rb) * d.wo + xo;
                const double py = double(y * d.stride - d.pad + i) + double(off_y[opos]);
                const double px = double(xo * d.stride - d.pad + j) + double(off_x[opos]);
                detail::Corner cs[4];
                detail::corners4(py, px, d.h, d.w, cs);
                double sy = 0.0, sx = 0.0;
                for (std::int64_t c = 0; c < d.c; ++c) {
                  const double g = double(dcol[((c * d.kh + i) * d.kw + j) * tc + pos]);
                  if (g == 0.0) continue;
                  const T* xc = xs + c * ihw;
                  for (const detail::Corner& cr : cs) {
                    if (cr.idx < 0) continue;
                    if (gx) gx[c * ihw + cr.idx] += T(g * cr.wgt);
                    const double xv = double(xc[cr.idx]);
                    sy += g * cr.dy * xv;
                    sx += g * cr.dx * xv;
                  }
                }
                if (goff) {
                  goff[(2 * t) * hw + opos] += T(sy);
                  goff[(2 * t + 1) * hw + opos] += T(sx);
                }
              }
          }
      }
    }
  });
}

template <class T>
Var<T> deform_conv2d(const Var<T>& x, const Var<T>& offsets, const Var<T>& w,
                     std::int64_t stride = 1, std::int64_t pad = 0) {
  return deform_conv2d(x, offsets, w, Var<T>{}, stride, pad);
}

} // namespace lensid::ag
