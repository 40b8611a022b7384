#pragma once

#include <cmath>
#include <vector>

#include "lensid/core/tensor.hpp"

namespace lensid {

/// Per-axis bilinear interpolation table, half-pixel centers, edge clamped:
/// src = (dst + 0.5) * in/out - 0.5.
struct LerpAxis {
  std::vector<std::int64_t> i0, i1;
  std::vector<double> frac;
};

inline LerpAxis lerp_axis(std::int64_t in, std::int64_t out) {
  LerpAxis a;
  a.i0.resize(static_cast<std::size_t>(out));
  a.i1.resize(static_cast<std::size_t>(out));
  a.frac.resize(static_cast<std::size_t>(out));
  const double scale = double(in) / double(out);
  for (std::int64_t d = 0; d < out; ++d) {
    double src = (double(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, double(in - 1));
    const std::int64_t lo = static_cast<std::int64_t>(std::floor(src));
    a.i0[static_cast<std::size_t>(d)] = lo;
    a.i1[static_cast<std::size_t>(d)] = std::min(lo + 1, in - 1);
    a.frac[static_cast<std::size_t>(d)] = src - double(lo);
  }
  return a;
}

/// Nearest source index per output position, same half-pixel grid.
inline std::vector<std::int64_t> nearest_axis(std::int64_t in, std::int64_t out) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(out));
  const double scale = double(in) / double(out);
  for (std::int64_t d = 0; d < out; ++d) {
    const std::int64_t src = static_cast<std::int64_t>(std::floor((double(d) + 0.5) * scale));
    idx[static_cast<std::size_t>(d)] = std::clamp<std::int64_t>(src, 0, in - 1);
  }
  return idx;
}

/// Bilinear resize of a (C,H,W) tensor.
template <class T>
Tensor<T> resize_bilinear_chw(const Tensor<T>& x, std::int64_t oh, std::int64_t ow) {
  check(x.rank() == 3, ErrorKind::shape, "resize_bilinear_chw: input must be (C,H,W)");
  const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const LerpAxis ay = lerp_axis(h, oh), ax = lerp_axis(w, ow);
  Tensor<T> out({c, oh, ow});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    const T* xp = x.data() + ch * h * w;
    T* op = out.data() + ch * oh * ow;
    for (std::int64_t y = 0; y < oh; ++y) {
      const std::int64_t y0 = ay.i0[static_cast<std::size_t>(y)];
      const std::int64_t y1 = ay.i1[static_cast<std::size_t>(y)];
      const double fy = ay.frac[static_cast<std::size_t>(y)];
      for (std::int64_t xo = 0; xo < ow; ++xo) {
        const std::int64_t x0 = ax.i0[static_cast<std::size_t>(xo)];
        const std::int64_t x1 = ax.i1[static_cast<std::size_t>(xo)];
        const double fx = ax.frac[static_cast<std::size_t>(xo)];
        const double top = double(xp[y0 * w + x0]) * (1.0 - fx) + double(xp[y0 * w + x1]) * fx;
        const double bot = double(xp[y1 * w + x0]) * (1.0 - fx) + double(xp[y1 * w + x1]) * fx;
        op[y * ow + xo] = T(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return out;
}

/// Nearest-neighbor resize of a (H,W) tensor; never interpolates values.
template <class T>
Tensor<T> resize_nearest_hw(const Tensor<T>& x, std::int64_t oh, std::int64_t ow) {
  check(x.rank() == 2, ErrorKind::shape, "resize_nearest_hw: input must be (H,W)");
  const std::int64_t h = x.dim(0), w = x.dim(1);
  const auto iy = nearest_axis(h, oh), ix = nearest_axis(w, ow);
  Tensor<T> out({oh, ow});
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t xo = 0; xo < ow; ++xo)
      out(y, xo) = x(iy[static_cast<std::size_t>(y)], ix[static_cast<std::size_t>(xo)]);
  return out;
}

} // namespace lensid
