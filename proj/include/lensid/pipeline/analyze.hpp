#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "lensid/analytics/report.hpp"
#include "lensid/data/video.hpp"
#include "lensid/pipeline/segmenter.hpp"

namespace lensid::pipeline {

struct AnalyzeConfig {
  double window_stride_s = 1.0;     // localization window stride
  std::int64_t window_frames = 5;   // frames sampled per 3 s window
  analytics::UnfoldingParams unfolding;
  analytics::InstabilityParams stability;
  analytics::MorphologyConfig morphology;

  void validate() const {
    check(window_stride_s > 0.0, ErrorKind::config, "window_stride_s must be positive");
    check(window_frames >= 2, ErrorKind::config, "window_frames must be at least 2");
    unfolding.validate();
    stability.validate();
    morphology.validate();
  }
};

struct AnalyzeResult {
  models::LocalizationResult localization;
  analytics::LensTimeline timeline;
  analytics::UnfoldingResult unfolding;
  analytics::InstabilityResult stability;
};

/// Full pipeline with an injectable window scorer: localize the implantation
/// phase, segment lens and pupil on every later frame, and measure the
/// timeline. Timeline t=0 is the first analyzed frame.
template <class ClipProbFn>
AnalyzeResult analyze_video_with(ClipProbFn&& clip_prob, const data::VideoFrames& video,
                                 Segmenter& lens, Segmenter& pupil,
                                 const AnalyzeConfig& cfg) {
  cfg.validate();
  AnalyzeResult res;
  res.localization = models::localize_implantation_with(clip_prob, video,
                                                        cfg.window_stride_s,
                                                        cfg.window_frames);
  if (!res.localization.found)
    throw PhaseNotFoundError("no implantation phase detected in " +
                             std::to_string(video.duration_s()) + " s of video");

  const std::int64_t first = std::int64_t(
      std::ceil(res.localization.end_s * video.fps() - 1e-9));
  check(first < video.frame_count(), ErrorKind::validation,
        "implantation phase runs to the end of the video; nothing left to analyze");

  std::vector<data::MaskImage> lens_masks, pupil_masks;
  lens_masks.reserve(std::size_t(video.frame_count() - first));
  pupil_masks.reserve(std::size_t(video.frame_count() - first));
  for (std::int64_t i = first; i < video.frame_count(); ++i) {
    const data::ImageTensor frame = video.frame(i);
    lens_masks.push_back(lens.segment(frame));
    pupil_masks.push_back(pupil.segment(frame));
  }
  res.timeline = analytics::lens_statistics(lens_masks, pupil_masks, video.fps(),
                                            cfg.morphology);
  res.unfolding = analytics::unfolding_delay(res.timeline, cfg.unfolding);
  res.stability = analytics::instability_profile(res.timeline, cfg.stability);
  return res;
}

/// Same pipeline scored by a trained phase model.
inline AnalyzeResult analyze_video(const models::PhaseModel<float>& phase,
                                   const data::VideoFrames& video, Segmenter& lens,
                                   Segmenter& pupil, AnalyzeConfig cfg) {
  cfg.window_frames = phase.config().sequence_length;
  return analyze_video_with(
      [&phase](const std::vector<data::ImageTensor>& frames) {
        return phase.classify(frames).clip_prob;
      },
      video, lens, pupil, cfg);
}

/// Report files plus a localization.json describing where the measured
/// interval sits in the source video.
inline void write_analysis_report(const AnalyzeResult& res, const AnalyzeConfig& cfg,
                                  const std::string& out_dir) {
  analytics::emit_report(res.timeline, res.unfolding, cfg.unfolding, res.stability,
                         cfg.stability, cfg.morphology, out_dir);
  nlohmann::json j{{"implantation_start_s", res.localization.start_s},
                   {"implantation_end_s", res.localization.end_s},
                   {"window_stride_s", cfg.window_stride_s},
                   {"windows_scored", res.localization.window_starts.size()}};
  std::ofstream out(std::filesystem::path(out_dir) / "localization.json",
                    std::ios::binary);
  check(out.good(), ErrorKind::io, "cannot open localization.json for writing");
  out << j.dump(2) << '\n';
  check(out.good(), ErrorKind::io, "failed writing localization.json");
}

} // namespace lensid::pipeline
