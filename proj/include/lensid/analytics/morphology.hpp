#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "lensid/core/tensor.hpp"

namespace lensid::analytics {

namespace detail {

// Offsets of a k-wide rectangular structuring element around its anchor.
// For even k the anchor sits at k/2, giving the asymmetric span [-k/2, k-1-k/2];
// dilation and erosion below use the SAME span, which keeps them adjoint, so
// closing stays extensive and opening anti-extensive for every k.
inline void se_span(std::int64_t k, std::int64_t& lo, std::int64_t& hi) {
  lo = k / 2;
  hi = k - 1 - lo;
}

enum class Combine { any, all };

// 1D pass along the last axis; window j in [p+from, p+to]. Out-of-image taps
// contribute `outside`: 0 for dilation, 1 for erosion. That pairing makes the
// two ops adjoint on the image lattice, so closing/opening are exactly
// extensive/anti-extensive and idempotent even at the borders.
inline Tensor<std::uint8_t> window_pass_cols(const Tensor<std::uint8_t>& x, std::int64_t from,
                                             std::int64_t to, Combine mode,
                                             std::uint8_t outside) {
  const std::int64_t h = x.dim(0), w = x.dim(1);
  Tensor<std::uint8_t> out({h, w});
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t p = 0; p < w; ++p) {
      std::uint8_t acc = mode == Combine::any ? 0 : 1;
      for (std::int64_t j = p + from; j <= p + to; ++j) {
        const std::uint8_t v = (j >= 0 && j < w) ? x(y, j) : outside;
        if (mode == Combine::any) acc |= v;
        else acc &= v;
        if ((mode == Combine::any) == bool(acc)) break;
      }
      out(y, p) = acc;
    }
  }
  return out;
}

inline Tensor<std::uint8_t> window_pass_rows(const Tensor<std::uint8_t>& x, std::int64_t from,
                                             std::int64_t to, Combine mode,
                                             std::uint8_t outside) {
  const std::int64_t h = x.dim(0), w = x.dim(1);
  Tensor<std::uint8_t> out({h, w});
  for (std::int64_t p = 0; p < h; ++p) {
    for (std::int64_t xo = 0; xo < w; ++xo) {
      std::uint8_t acc = mode == Combine::any ? 0 : 1;
      for (std::int64_t j = p + from; j <= p + to; ++j) {
        const std::uint8_t v = (j >= 0 && j < h) ? x(j, xo) : outside;
        if (mode == Combine::any) acc |= v;
        else acc &= v;
        if ((mode == Combine::any) == bool(acc)) break;
      }
      out(p, xo) = acc;
    }
  }
  return out;
}

} // namespace detail

/// dilate(A) = {p : some SE offset s has p-s in A}; rectangular kh x kw element.
inline Tensor<std::uint8_t> dilate(const Tensor<std::uint8_t>& m, std::int64_t kh,
                                   std::int64_t kw) {
  check(m.rank() == 2, ErrorKind::shape, "dilate: mask must be (H,W)");
  check(kh >= 1 && kw >= 1, ErrorKind::config, "dilate: kernel must be at least 1x1");
  std::int64_t lo_h, hi_h, lo_w, hi_w;
  detail::se_span(kh, lo_h, hi_h);
  detail::se_span(kw, lo_w, hi_w);
  // p - s for s in [-lo, hi] covers [p-hi, p+lo]
  Tensor<std::uint8_t> rows =
      detail::window_pass_rows(m, -hi_h, lo_h, detail::Combine::any, 0);
  return detail::window_pass_cols(rows, -hi_w, lo_w, detail::Combine::any, 0);
}

/// erode(A) = {p : every SE offset s has p+s in A}; taps falling outside the
/// image are treated as satisfied (see window_pass_* on why).
inline Tensor<std::uint8_t> erode(const Tensor<std::uint8_t>& m, std::int64_t kh,
                                  std::int64_t kw) {
  check(m.rank() == 2, ErrorKind::shape, "erode: mask must be (H,W)");
  check(kh >= 1 && kw >= 1, ErrorKind::config, "erode: kernel must be at least 1x1");
  std::int64_t lo_h, hi_h, lo_w, hi_w;
  detail::se_span(kh, lo_h, hi_h);
  detail::se_span(kw, lo_w, hi_w);
  Tensor<std::uint8_t> rows =
      detail::window_pass_rows(m, -lo_h, hi_h, detail::Combine::all, 1);
  return detail::window_pass_cols(rows, -lo_w, hi_w, detail::Combine::all, 1);
}

/// Closing bridges gaps narrower than the element; always a superset of the
/// input.
inline Tensor<std::uint8_t> closing(const Tensor<std::uint8_t>& m, std::int64_t k) {
  return erode(dilate(m, k, k), k, k);
}

/// Opening removes blobs that cannot contain the element; always a subset of
/// the input.
inline Tensor<std::uint8_t> opening(const Tensor<std::uint8_t>& m, std::int64_t k) {
  return dilate(erode(m, k, k), k, k);
}

/// Keep only the largest 8-connected foreground component (first one in scan
/// order on a tie). Empty input stays empty.
inline Tensor<std::uint8_t> largest_component(const Tensor<std::uint8_t>& m) {
  check(m.rank() == 2, ErrorKind::shape, "largest_component: mask must be (H,W)");
  const std::int64_t h = m.dim(0), w = m.dim(1);
  std::vector<std::int32_t> label(std::size_t(h * w), 0);
  std::int32_t next = 0;
  std::int64_t best_area = 0;
  std::int32_t best_label = 0;
  std::vector<std::int64_t> stack;
  for (std::int64_t start = 0; start < h * w; ++start) {
    if (!m[start] || label[std::size_t(start)] != 0) continue;
    ++next;
    std::int64_t area = 0;
    stack.assign(1, start);
    label[std::size_t(start)] = next;
    while (!stack.empty()) {
      const std::int64_t p = stack.back();
      stack.pop_back();
      ++area;
      const std::int64_t y = p / w, x = p % w;
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const std::int64_t ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const std::int64_t q = ny * w + nx;
          if (m[q] && label[std::size_t(q)] == 0) {
            label[std::size_t(q)] = next;
            stack.push_back(q);
          }
        }
    }
    if (area > best_area) {
      best_area = area;
      best_label = next;
    }
  }
  Tensor<std::uint8_t> out({h, w});
  if (best_label == 0) return out;
  for (std::int64_t i = 0; i < h * w; ++i)
    out[i] = label[std::size_t(i)] == best_label ? 1 : 0;
  return out;
}

struct PixelPoint {
  std::int64_t x = 0;
  std::int64_t y = 0;
};

namespace detail {

inline std::int64_t cross(const PixelPoint& o, const PixelPoint& a, const PixelPoint& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline std::int64_t floor_div(std::int64_t n, std::int64_t d) {
  // d > 0
  return n >= 0 ? n / d : -((-n + d - 1) / d);
}

inline std::int64_t ceil_div(std::int64_t n, std::int64_t d) {
  return n >= 0 ? (n + d - 1) / d : -((-n) / d);
}

} // namespace detail

/// Smallest convex polygon around the points, counterclockwise, collinear
/// interior points dropped. Monotone chain on integer coordinates.
inline std::vector<PixelPoint> convex_hull(std::vector<PixelPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const PixelPoint& a, const PixelPoint& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const PixelPoint& a, const PixelPoint& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  std::vector<PixelPoint> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Replace the support with every pixel whose center lies inside or on its
/// convex hull. Integer-exact rasterization: per row, each hull edge yields a
/// rational crossing, and monotonicity of ceil/floor makes the row interval
/// [ceil(min crossing), floor(max crossing)] exact.
inline Tensor<std::uint8_t> fill_convex_hull(const Tensor<std::uint8_t>& m) {
  check(m.rank() == 2, ErrorKind::shape, "fill_convex_hull: mask must be (H,W)");
  const std::int64_t h = m.dim(0), w = m.dim(1);
  std::vector<PixelPoint> pts;
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      if (m(y, x)) pts.push_back({x, y});
  Tensor<std::uint8_t> out({h, w});
  if (pts.empty()) return out;
  const std::vector<PixelPoint> hull = convex_hull(std::move(pts));
  std::int64_t ymin = hull[0].y, ymax = hull[0].y;
  for (const auto& p : hull) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  for (std::int64_t y = ymin; y <= ymax; ++y) {
    std::int64_t xlo = w, xhi = -1;
    bool touched = false;
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const PixelPoint a = hull[i];
      const PixelPoint b = hull[(i + 1) % hull.size()];
      if (y < std::min(a.y, b.y) || y > std::max(a.y, b.y)) continue;
      if (a.y == b.y) {
        xlo = std::min({xlo, a.x, b.x});
        xhi = std::max({xhi, a.x, b.x});
      } else {
        std::int64_t num = a.x * (b.y - a.y) + (b.x - a.x) * (y - a.y);
        std::int64_t den = b.y - a.y;
        if (den < 0) {
          num = -num;
          den = -den;
        }
        xlo = std::min(xlo, detail::ceil_div(num, den));
        xhi = std::max(xhi, detail::floor_div(num, den));
      }
      touched = true;
    }
    if (!touched || xhi < xlo) continue;
    for (std::int64_t x = std::max<std::int64_t>(0, xlo); x <= std::min(w - 1, xhi); ++x)
      out(y, x) = 1;
  }
  return out;
}

} // namespace lensid::analytics
