#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lensid/analytics/timeline.hpp"
#include "lensid/data/image_io.hpp"

namespace lensid::analytics {

namespace detail {

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Canvas {
  Tensor<float> rgb;

  Canvas(std::int64_t h, std::int64_t w) : rgb({3, h, w}) {
    for (std::int64_t i = 0; i < rgb.numel(); ++i) rgb[i] = 1.0f;
  }

  std::int64_t height() const { return rgb.dim(1); }
  std::int64_t width() const { return rgb.dim(2); }

  void set(std::int64_t x, std::int64_t y, float r, float g, float b) {
    if (x < 0 || y < 0 || x >= width() || y >= height()) return;
    rgb(0, y, x) = r;
    rgb(1, y, x) = g;
    rgb(2, y, x) = b;
  }

  void line(std::int64_t x0, std::int64_t y0, std::int64_t x1, std::int64_t y1, float r,
            float g, float b) {
    const std::int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const std::int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    std::int64_t err = dx + dy;
    for (;;) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const std::int64_t e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

// Series plot: axes in black, valid samples joined by line segments, gaps at
// invalid frames left open. No text; the CSV carries the numbers.
inline void plot_series(const LensTimeline& tl, const std::vector<double>& values,
                        const std::string& path, float r, float g, float b) {
  const std::int64_t kw = 640, kh = 360, margin = 32;
  Canvas canvas(kh, kw);
  canvas.line(margin, kh - margin, kw - margin / 2, kh - margin, 0, 0, 0);
  canvas.line(margin, kh - margin, margin, margin / 2, 0, 0, 0);

  double t_max = tl.t_s.back();
  if (t_max <= 0.0) t_max = 1.0;
  double v_max = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (tl.valid[i]) v_max = std::max(v_max, values[i]);
  v_max = v_max > 0.0 ? 1.05 * v_max : 1.0;

  const auto px = [&](double t) {
    return margin + std::int64_t(std::lround((t / t_max) * double(kw - 2 * margin)));
  };
  const auto py = [&](double v) {
    return kh - margin - std::int64_t(std::lround((v / v_max) * double(kh - 2 * margin)));
  };

  bool have_prev = false;
  std::int64_t prev_x = 0, prev_y = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!tl.valid[i]) {
      have_prev = false;
      continue;
    }
    const std::int64_t x = px(tl.t_s[i]), y = py(values[i]);
    if (have_prev)
      canvas.line(prev_x, prev_y, x, y, r, g, b);
    else
      canvas.set(x, y, r, g, b);
    prev_x = x;
    prev_y = y;
    have_prev = true;
  }
  data::save_image(canvas.rgb, path);
}

} // namespace detail

/// The timeline as CSV text. Doubles are printed with %.17g so they
/// round-trip exactly and reruns produce byte-identical files.
inline std::string timeline_csv(const LensTimeline& tl) {
  tl.validate();
  std::string out = "t_s,rel_area,rel_dist,valid\n";
  for (std::int64_t i = 0; i < tl.frames(); ++i) {
    out += detail::g17(tl.t_s[std::size_t(i)]);
    out += ',';
    out += detail::g17(tl.rel_area[std::size_t(i)]);
    out += ',';
    out += detail::g17(tl.rel_dist[std::size_t(i)]);
    out += ',';
    out += tl.valid[std::size_t(i)] ? '1' : '0';
    out += '\n';
  }
  return out;
}

/// Summary JSON: measured times (null when not reached) plus every parameter
/// that shaped them.
inline nlohmann::json summary_json(const UnfoldingResult& unfold,
                                   const UnfoldingParams& uparams,
                                   const InstabilityResult& stab,
                                   const InstabilityParams& iparams,
                                   const MorphologyConfig& morph, double fps) {
  nlohmann::json j;
  j["unfolding_delay_s"] =
      unfold.reached ? nlohmann::json(unfold.delay_s) : nlohmann::json(nullptr);
  j["stabilization_time_s"] =
      stab.reached ? nlohmann::json(stab.stabilization_s) : nlohmann::json(nullptr);
  j["params"] = {
      {"fps", fps},
      {"unfolding",
       {{"area_fraction", uparams.area_fraction},
        {"dist_threshold", uparams.dist_threshold},
        {"sustain_s", uparams.sustain_s},
        {"resolved_area_threshold", unfold.area_threshold}}},
      {"stability",
       {{"dist_threshold", iparams.dist_threshold},
        {"sustain_s", iparams.sustain_s},
        {"guard_fraction", iparams.guard_fraction}}},
      {"morphology",
       {{"closing_size", morph.closing_size},
        {"opening_size", morph.opening_size},
        {"close_first", morph.close_first}}},
  };
  return j;
}

/// Write timeline.csv, summary.json, rel_area.png and rel_dist.png into
/// out_dir (created if missing). Same inputs give byte-identical CSV.
inline void emit_report(const LensTimeline& tl, const UnfoldingResult& unfold,
                        const UnfoldingParams& uparams, const InstabilityResult& stab,
                        const InstabilityParams& iparams, const MorphologyConfig& morph,
                        const std::string& out_dir) {
  tl.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  check(!ec && std::filesystem::is_directory(out_dir), ErrorKind::io,
        "cannot create report directory: " + out_dir);
  const std::filesystem::path base(out_dir);

  {
    std::ofstream csv(base / "timeline.csv", std::ios::binary);
    check(csv.good(), ErrorKind::io, "cannot open timeline.csv for writing");
    csv << timeline_csv(tl);
    check(csv.good(), ErrorKind::io, "failed writing timeline.csv");
  }
  {
    std::ofstream js(base / "summary.json", std::ios::binary);
    check(js.good(), ErrorKind::io, "cannot open summary.json for writing");
    js << summary_json(unfold, uparams, stab, iparams, morph, tl.fps).dump(2) << '\n';
    check(js.good(), ErrorKind::io, "failed writing summary.json");
  }
  detail::plot_series(tl, tl.rel_area, (base / "rel_area.png").string(), 0.10f, 0.35f,
                      0.80f);
  detail::plot_series(tl, tl.rel_dist, (base / "rel_dist.png").string(), 0.85f, 0.30f,
                      0.15f);
}

} // namespace lensid::analytics
