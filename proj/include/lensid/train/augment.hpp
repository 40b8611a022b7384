#pragma once

#include <cmath>
#include <vector>

#include "lensid/clips/clip_generator.hpp"
#include "lensid/core/rng.hpp"
#include "lensid/data/image.hpp"

namespace lensid::train {

/// Parameter ranges for the random training augmentations. Each transform is
/// applied independently with probability `transform_prob`; ranges are
/// sampled uniformly.
struct AugmentConfig {
  double transform_prob = 0.5;
  double contrast_lo = 0.7, contrast_hi = 1.3;
  double brightness_lo = -0.2, brightness_hi = 0.2;
  double blur_sigma_lo = 0.5, blur_sigma_hi = 2.0;
  int motion_len_lo = 3, motion_len_hi = 9;
  double max_shift_frac = 0.1;  // of the image side, per axis
  double scale_lo = 0.9, scale_hi = 1.1;
  double max_rotate_deg = 15.0;

  void validate() const {
    check(transform_prob >= 0.0 && transform_prob <= 1.0, ErrorKind::config,
          "transform_prob must be in [0,1]");
    check(contrast_lo > 0.0 && contrast_hi >= contrast_lo, ErrorKind::config,
          "bad contrast range");
    check(blur_sigma_lo > 0.0 && blur_sigma_hi >= blur_sigma_lo, ErrorKind::config,
          "bad blur sigma range");
    check(motion_len_lo >= 2 && motion_len_hi >= motion_len_lo, ErrorKind::config,
          "bad motion blur length range");
    check(scale_lo > 0.0 && scale_hi >= scale_lo, ErrorKind::config, "bad scale range");
    check(max_shift_frac >= 0.0 && max_rotate_deg >= 0.0, ErrorKind::config,
          "shift/rotation bounds must be non-negative");
  }
};

/// A rigid-plus-scale warp about the image center: output pixel p' samples
/// the input at p = R(-θ)·(p' - c - t)/s + c, so positive shift moves content
/// in the +x/+y direction and scale > 1 zooms in.
struct GeomTransform {
  double shift_x = 0.0;
  double shift_y = 0.0;
  double scale = 1.0;
  double rotate_deg = 0.0;

  bool is_identity() const {
    return shift_x == 0.0 && shift_y == 0.0 && scale == 1.0 && rotate_deg == 0.0;
  }
};

namespace detail {

struct InverseMap {
  double cx, cy, shift_x, shift_y, inv_scale, cos_a, sin_a;

  InverseMap(const GeomTransform& g, std::int64_t h, std::int64_t w)
      : cx((double(w) - 1.0) / 2.0),
        cy((double(h) - 1.0) / 2.0),
        shift_x(g.shift_x),
        shift_y(g.shift_y),
        inv_scale(1.0 / g.scale),
        cos_a(std::cos(-g.rotate_deg * M_PI / 180.0)),
        sin_a(std::sin(-g.rotate_deg * M_PI / 180.0)) {}

  void source(double ox, double oy, double& sx, double& sy) const {
    const double dx = ox - cx - shift_x;
    const double dy = oy - cy - shift_y;
    sx = (cos_a * dx - sin_a * dy) * inv_scale + cx;
    sy = (sin_a * dx + cos_a * dy) * inv_scale + cy;
  }
};

} // namespace detail

/// Warp an RGB image; bilinear sampling, out-of-frame regions become black.
inline data::ImageTensor warp_image(const data::ImageTensor& img, const GeomTransform& g) {
  if (g.is_identity()) return img;
  check(g.scale > 0.0, ErrorKind::config, "warp scale must be positive");
  const Tensor<float>& x = img.values();
  const std::int64_t h = x.dim(1), w = x.dim(2);
  const detail::InverseMap map(g, h, w);
  Tensor<float> out({3, h, w});
  for (std::int64_t oy = 0; oy < h; ++oy) {
    for (std::int64_t ox = 0; ox < w; ++ox) {
      double sx, sy;
      map.source(double(ox), double(oy), sx, sy);
      if (sx < 0.0 || sy < 0.0 || sx > double(w - 1) || sy > double(h - 1)) continue;
      const auto x0 = std::int64_t(std::floor(sx)), y0 = std::int64_t(std::floor(sy));
      const auto x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - double(x0), fy = sy - double(y0);
      for (std::int64_t c = 0; c < 3; ++c) {
        const double top = double(x(c, y0, x0)) * (1.0 - fx) + double(x(c, y0, x1)) * fx;
        const double bot = double(x(c, y1, x0)) * (1.0 - fx) + double(x(c, y1, x1)) * fx;
        out(c, oy, ox) = float(top * (1.0 - fy) + bot * fy);
      }
    }
  }
  return data::ImageTensor(std::move(out));
}

/// Warp a mask with the same transform; nearest-neighbor sampling keeps the
/// labels binary, out-of-frame regions become background.
inline data::MaskImage warp_mask(const data::MaskImage& mask, const GeomTransform& g) {
  if (g.is_identity()) return mask;
  check(g.scale > 0.0, ErrorKind::config, "warp scale must be positive");
  const Tensor<std::uint8_t>& x = mask.labels();
  const std::int64_t h = x.dim(0), w = x.dim(1);
  const detail::InverseMap map(g, h, w);
  Tensor<std::uint8_t> out({h, w});
  for (std::int64_t oy = 0; oy < h; ++oy) {
    for (std::int64_t ox = 0; ox < w; ++ox) {
      double sx, sy;
      map.source(double(ox), double(oy), sx, sy);
      const auto xi = std::int64_t(std::lround(sx)), yi = std::int64_t(std::lround(sy));
      if (xi < 0 || yi < 0 || xi >= w || yi >= h) continue;
      out(oy, ox) = x(yi, xi);
    }
  }
  return data::MaskImage(std::move(out));
}

/// Scale pixel values away from (or toward) the image mean; clamped to [0,1].
inline data::ImageTensor adjust_contrast(const data::ImageTensor& img, double factor) {
  const Tensor<float>& x = img.values();
  double mean = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) mean += double(x[i]);
  mean /= double(x.numel());
  Tensor<float> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i)
    out[i] = float(std::clamp(mean + factor * (double(x[i]) - mean), 0.0, 1.0));
  return data::ImageTensor(std::move(out));
}

inline data::ImageTensor adjust_brightness(const data::ImageTensor& img, double delta) {
  const Tensor<float>& x = img.values();
  Tensor<float> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i)
    out[i] = float(std::clamp(double(x[i]) + delta, 0.0, 1.0));
  return data::ImageTensor(std::move(out));
}

namespace detail {

// Convolve (3,H,W) with a dense kernel, replicating edges.
inline Tensor<float> conv_replicate(const Tensor<float>& x, const std::vector<double>& k,
                                    std::int64_t kh, std::int64_t kw) {
  const std::int64_t h = x.dim(1), w = x.dim(2);
  const std::int64_t ry = kh / 2, rx = kw / 2;
  Tensor<float> out({3, h, w});
  for (std::int64_t c = 0; c < 3; ++c) {
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t xo = 0; xo < w; ++xo) {
        double acc = 0.0;
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          const std::int64_t sy = std::clamp<std::int64_t>(y + ky - ry, 0, h - 1);
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const double kv = k[std::size_t(ky * kw + kx)];
            if (kv == 0.0) continue;
            const std::int64_t sx = std::clamp<std::int64_t>(xo + kx - rx, 0, w - 1);
            acc += kv * double(x(c, sy, sx));
          }
        }
        out(c, y, xo) = float(acc);
      }
    }
  }
  return out;
}

} // namespace detail

inline data::ImageTensor gaussian_blur(const data::ImageTensor& img, double sigma) {
  check(sigma > 0.0, ErrorKind::config, "blur sigma must be positive");
  const auto radius = std::max<std::int64_t>(1, std::int64_t(std::ceil(3.0 * sigma)));
  std::vector<double> k1(std::size_t(2 * radius + 1));
  double norm = 0.0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * double(i * i) / (sigma * sigma));
    k1[std::size_t(i + radius)] = v;
    norm += v;
  }
  for (auto& v : k1) v /= norm;
  // separable: horizontal pass then vertical pass
  Tensor<float> tmp = detail::conv_replicate(img.values(), k1, 1, 2 * radius + 1);
  return data::ImageTensor(detail::conv_replicate(tmp, k1, 2 * radius + 1, 1));
}

/// Average along a line of `length` pixels at the given angle, approximating
/// camera or subject motion during the exposure.
inline data::ImageTensor motion_blur(const data::ImageTensor& img, int length, double angle_deg) {
  check(length >= 2, ErrorKind::config, "motion blur length must be at least 2");
  const std::int64_t k = length;
  std::vector<double> kernel(std::size_t(k * k), 0.0);
  const double a = angle_deg * M_PI / 180.0;
  const double cx = (double(k) - 1.0) / 2.0;
  std::int64_t taps = 0;
  for (std::int64_t t = 0; t < k; ++t) {
    const double u = double(t) - cx;
    const auto px = std::int64_t(std::lround(cx + u * std::cos(a)));
    const auto py = std::int64_t(std::lround(cx + u * std::sin(a)));
    if (px < 0 || py < 0 || px >= k || py >= k) continue;
    if (kernel[std::size_t(py * k + px)] == 0.0) {
      kernel[std::size_t(py * k + px)] = 1.0;
      ++taps;
    }
  }
  for (auto& v : kernel) v /= double(taps);
  return data::ImageTensor(detail::conv_replicate(img.values(), kernel, k, k));
}

namespace detail {

struct DrawnAugment {
  bool contrast = false, brightness = false, gauss = false, motion = false;
  double contrast_factor = 1.0, brightness_delta = 0.0, sigma = 1.0, motion_angle = 0.0;
  int motion_length = 3;
  GeomTransform geom;
};

// Coin flips and parameter draws happen in one fixed order so a given rng
// state always produces the same augmentation.
inline DrawnAugment draw_augment(const AugmentConfig& cfg, std::int64_t side, Rng& rng) {
  DrawnAugment d;
  if ((d.motion = rng.bernoulli(cfg.transform_prob))) {
    d.motion_length =
        cfg.motion_len_lo + int(rng.uniform_int(std::uint64_t(cfg.motion_len_hi - cfg.motion_len_lo + 1)));
    d.motion_angle = rng.uniform(0.0, 180.0);
  }
  if ((d.gauss = rng.bernoulli(cfg.transform_prob)))
    d.sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
  if ((d.contrast = rng.bernoulli(cfg.transform_prob)))
    d.contrast_factor = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
  if ((d.brightness = rng.bernoulli(cfg.transform_prob)))
    d.brightness_delta = rng.uniform(cfg.brightness_lo, cfg.brightness_hi);
  if (rng.bernoulli(cfg.transform_prob)) {
    const double bound = cfg.max_shift_frac * double(side);
    d.geom.shift_x = rng.uniform(-bound, bound);
    d.geom.shift_y = rng.uniform(-bound, bound);
  }
  if (rng.bernoulli(cfg.transform_prob)) d.geom.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
  if (rng.bernoulli(cfg.transform_prob))
    d.geom.rotate_deg = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg);
  return d;
}

inline data::ImageTensor apply_photometric(data::ImageTensor img, const DrawnAugment& d) {
  if (d.motion) img = motion_blur(img, d.motion_length, d.motion_angle);
  if (d.gauss) img = gaussian_blur(img, d.sigma);
  if (d.contrast) img = adjust_contrast(img, d.contrast_factor);
  if (d.brightness) img = adjust_brightness(img, d.brightness_delta);
  return img;
}

} // namespace detail

/// Randomly perturb a segmentation sample. Photometric transforms touch only
/// the image; the geometric warp is applied identically to image and mask.
inline data::SegSample augment_seg(const data::SegSample& sample, const AugmentConfig& cfg,
                                   Rng& rng) {
  cfg.validate();
  sample.validate();
  detail::DrawnAugment d = detail::draw_augment(cfg, sample.image.width(), rng);
  data::SegSample out = sample;
  out.image = detail::apply_photometric(out.image, d);
  if (!d.geom.is_identity()) {
    out.image = warp_image(out.image, d.geom);
    out.mask = warp_mask(out.mask, d.geom);
  }
  return out;
}

/// Randomly perturb a clip; one draw covers all frames so the clip stays
/// temporally coherent.
inline clips::ClipSample augment_clip(const clips::ClipSample& clip, const AugmentConfig& cfg,
                                      Rng& rng) {
  cfg.validate();
  check(!clip.frames.empty(), ErrorKind::validation, "cannot augment an empty clip");
  detail::DrawnAugment d = detail::draw_augment(cfg, clip.frames.front().width(), rng);
  clips::ClipSample out = clip;
  for (auto& frame : out.frames) {
    frame = detail::apply_photometric(frame, d);
    if (!d.geom.is_identity()) frame = warp_image(frame, d.geom);
  }
  return out;
}

} // namespace lensid::train
