#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lensid/analytics/morphology.hpp"
#include "lensid/data/image.hpp"

namespace lensid::analytics {

struct MorphologyConfig {
  std::int64_t closing_size = 15;
  std::int64_t opening_size = 10;
  bool close_first = true;

  void validate() const {
    check(closing_size >= 1, ErrorKind::config, "closing_size must be at least 1");
    check(opening_size >= 1, ErrorKind::config, "opening_size must be at least 1");
  }
};

/// A cleaned-up, convex instrument mask plus the scalars downstream code needs.
struct ConvexMask {
  data::MaskImage mask;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double area = 0.0;
  bool valid = false;
};

/// Close small holes, drop speckle, keep the dominant blob, then replace it
/// with its filled convex hull. An empty result is flagged invalid rather
/// than thrown: single bad frames should not kill a whole video.
inline ConvexMask postprocess_mask(const data::MaskImage& raw,
                                   const MorphologyConfig& cfg = {}) {
  cfg.validate();
  const Tensor<std::uint8_t>& m = raw.labels();
  Tensor<std::uint8_t> smooth =
      cfg.close_first ? opening(closing(m, cfg.closing_size), cfg.opening_size)
                      : closing(opening(m, cfg.opening_size), cfg.closing_size);
  Tensor<std::uint8_t> hull = fill_convex_hull(largest_component(smooth));

  ConvexMask out;
  out.mask = data::MaskImage(std::move(hull));
  const Tensor<std::uint8_t>& labels = out.mask.labels();
  std::int64_t area = 0;
  double sx = 0.0, sy = 0.0;
  for (std::int64_t y = 0; y < labels.dim(0); ++y)
    for (std::int64_t x = 0; x < labels.dim(1); ++x)
      if (labels(y, x)) {
        ++area;
        sx += double(x);
        sy += double(y);
      }
  if (area > 0) {
    out.area = double(area);
    out.centroid_x = sx / double(area);
    out.centroid_y = sy / double(area);
    out.valid = true;
  }
  return out;
}

/// Per-frame lens measurements relative to the pupil, sampled at fps.
/// rel_area and rel_dist are meaningful only where valid is set.
struct LensTimeline {
  double fps = 0.0;
  std::vector<double> t_s;
  std::vector<double> rel_area;
  std::vector<double> rel_dist;
  std::vector<std::uint8_t> valid;

  std::int64_t frames() const { return std::int64_t(t_s.size()); }
  double duration_s() const { return t_s.empty() ? 0.0 : t_s.back(); }

  void validate() const {
    check(fps > 0.0, ErrorKind::validation, "timeline fps must be positive");
    check(!t_s.empty(), ErrorKind::validation, "timeline has no frames");
    check(rel_area.size() == t_s.size() && rel_dist.size() == t_s.size() &&
              valid.size() == t_s.size(),
          ErrorKind::validation, "timeline columns must have equal length");
  }
};

/// Build the timeline from paired per-frame lens and pupil masks.
/// rel_area = |lens| / |pupil|; rel_dist = centroid distance normalised by the
/// pupil's equivalent diameter 2*sqrt(|pupil|/pi). Frames where either mask
/// postprocesses to empty are flagged invalid and excluded downstream.
inline LensTimeline lens_statistics(const std::vector<data::MaskImage>& lens,
                                    const std::vector<data::MaskImage>& pupil, double fps,
                                    const MorphologyConfig& cfg = {}) {
  check(fps > 0.0, ErrorKind::validation, "lens_statistics: fps must be positive");
  check(!lens.empty(), ErrorKind::validation, "lens_statistics: no frames given");
  check(lens.size() == pupil.size(), ErrorKind::validation,
        "lens_statistics: lens and pupil frame counts differ");

  LensTimeline tl;
  tl.fps = fps;
  const std::int64_t n = std::int64_t(lens.size());
  tl.t_s.resize(std::size_t(n));
  tl.rel_area.assign(std::size_t(n), 0.0);
  tl.rel_dist.assign(std::size_t(n), 0.0);
  tl.valid.assign(std::size_t(n), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    tl.t_s[std::size_t(i)] = double(i) / fps;
    const ConvexMask l = postprocess_mask(lens[std::size_t(i)], cfg);
    const ConvexMask p = postprocess_mask(pupil[std::size_t(i)], cfg);
    if (!l.valid || !p.valid) continue;
    const double dx = l.centroid_x - p.centroid_x;
    const double dy = l.centroid_y - p.centroid_y;
    const double equiv_diameter = 2.0 * std::sqrt(p.area / 3.14159265358979323846);
    tl.rel_area[std::size_t(i)] = l.area / p.area;
    tl.rel_dist[std::size_t(i)] = std::sqrt(dx * dx + dy * dy) / equiv_diameter;
    tl.valid[std::size_t(i)] = 1;
  }
  return tl;
}

struct UnfoldingParams {
  double area_fraction = 0.95;   // of the 95th percentile of rel_area
  double dist_threshold = 0.1;
  double sustain_s = 2.0;

  void validate() const {
    check(area_fraction > 0.0 && area_fraction <= 1.0, ErrorKind::config,
          "area_fraction must be in (0, 1]");
    check(dist_threshold >= 0.0, ErrorKind::config, "dist_threshold must be >= 0");
    check(sustain_s >= 0.0, ErrorKind::config, "sustain_s must be >= 0");
  }
};

struct UnfoldingResult {
  bool reached = false;
  double delay_s = 0.0;
  double area_threshold = 0.0;  // resolved absolute rel_area threshold
};

namespace detail {

inline std::vector<std::int64_t> valid_indices(const LensTimeline& tl) {
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < tl.frames(); ++i)
    if (tl.valid[std::size_t(i)]) idx.push_back(i);
  return idx;
}

// Nearest-rank percentile of the valid rel_area values.
inline double area_percentile(const LensTimeline& tl, const std::vector<std::int64_t>& idx,
                              double q) {
  std::vector<double> vals;
  vals.reserve(idx.size());
  for (std::int64_t i : idx) vals.push_back(tl.rel_area[std::size_t(i)]);
  std::sort(vals.begin(), vals.end());
  const std::int64_t n = std::int64_t(vals.size());
  std::int64_t rank = std::int64_t(std::ceil(q * double(n))) - 1;
  rank = std::clamp<std::int64_t>(rank, 0, n - 1);
  return vals[std::size_t(rank)];
}

constexpr double kTimeEps = 1e-9;

} // namespace detail

/// Earliest time at which the lens stays unfolded: every valid frame in
/// [t, t + sustain_s] has rel_area >= area_fraction * p95(rel_area) and
/// rel_dist <= dist_threshold. Not reached is a normal outcome; a timeline
/// with no valid frames at all is an error.
inline UnfoldingResult unfolding_delay(const LensTimeline& tl,
                                       const UnfoldingParams& params = {}) {
  tl.validate();
  params.validate();
  const std::vector<std::int64_t> idx = detail::valid_indices(tl);
  check(!idx.empty(), ErrorKind::validation,
        "unfolding_delay: no valid frames in timeline");

  UnfoldingResult res;
  res.area_threshold =
      params.area_fraction * detail::area_percentile(tl, idx, 0.95);
  const double t_last = tl.t_s.back();
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const double t0 = tl.t_s[std::size_t(idx[c])];
    if (t0 + params.sustain_s > t_last + detail::kTimeEps) break;
    bool ok = true;
    for (std::size_t j = c; j < idx.size(); ++j) {
      const std::int64_t i = idx[j];
      if (tl.t_s[std::size_t(i)] > t0 + params.sustain_s + detail::kTimeEps) break;
      if (tl.rel_area[std::size_t(i)] < res.area_threshold ||
          tl.rel_dist[std::size_t(i)] > params.dist_threshold) {
        ok = false;
        break;
      }
    }
    if (ok) {
      res.reached = true;
      res.delay_s = t0;
      return res;
    }
  }
  return res;
}

struct InstabilityParams {
  double dist_threshold = 0.1;
  double sustain_s = 5.0;
  double guard_fraction = 0.9;  // movement must not recur before this share of the video

  void validate() const {
    check(dist_threshold > 0.0, ErrorKind::config, "dist_threshold must be > 0");
    check(sustain_s >= 0.0, ErrorKind::config, "sustain_s must be >= 0");
    check(guard_fraction >= 0.0 && guard_fraction <= 1.0, ErrorKind::config,
          "guard_fraction must be in [0, 1]");
  }
};

struct InstabilityResult {
  bool reached = false;
  double stabilization_s = 0.0;
};

/// Earliest time after which the lens stops moving: every valid frame in
/// [t, t + sustain_s] has rel_dist < dist_threshold, and no valid frame up to
/// guard_fraction * duration exceeds the threshold again.
inline InstabilityResult instability_profile(const LensTimeline& tl,
                                             const InstabilityParams& params = {}) {
  tl.validate();
  params.validate();
  const std::vector<std::int64_t> idx = detail::valid_indices(tl);
  check(!idx.empty(), ErrorKind::validation,
        "instability_profile: no valid frames in timeline");

  InstabilityResult res;
  const double t_last = tl.t_s.back();
  const double guard_end = params.guard_fraction * t_last;
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const double t0 = tl.t_s[std::size_t(idx[c])];
    if (t0 + params.sustain_s > t_last + detail::kTimeEps) break;
    bool ok = true;
    for (std::size_t j = c; j < idx.size(); ++j) {
      const std::int64_t i = idx[j];
      const double t = tl.t_s[std::size_t(i)];
      const bool in_sustain = t <= t0 + params.sustain_s + detail::kTimeEps;
      const bool in_guard = t <= guard_end + detail::kTimeEps;
      if (!in_sustain && !in_guard) break;
      if (tl.rel_dist[std::size_t(i)] >= params.dist_threshold) {
        ok = false;
        break;
      }
    }
    if (ok) {
      res.reached = true;
      res.stabilization_s = t0;
      return res;
    }
  }
  return res;
}

} // namespace lensid::analytics
