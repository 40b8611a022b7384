#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "lensid/data/annotations.hpp"
#include "lensid/data/video.hpp"

namespace lensid::clips {

inline constexpr double kClipSeconds = 3.0;
inline constexpr int kImplantationClips = 12;
inline constexpr int kPreRestClips = 8;
inline constexpr int kPostRestClips = 4;
inline constexpr double kMinRestClipSeconds = 1.0;

enum class ClipLabel { implantation, rest };

inline std::string to_string(ClipLabel l) {
  return l == ClipLabel::implantation ? "Implantation" : "Rest";
}

inline ClipLabel clip_label_from_string(const std::string& s) {
  if (s == "Implantation") return ClipLabel::implantation;
  if (s == "Rest") return ClipLabel::rest;
  throw DecodeError("unknown clip label: " + s);
}

struct ClipSpec {
  std::string video_id;
  double start = 0; // seconds
  double end = 0;
  ClipLabel label = ClipLabel::rest;

  double length() const { return end - start; }
};

/// Split one annotated video into its 24 labelled clips: the pre-phase
/// segment into 8 equal Rest clips, 12 overlapping 3-second Implantation
/// clips with starts evenly spaced across the phase, and the post-phase
/// segment into 4 equal Rest clips.
inline std::vector<ClipSpec> partition_video(const data::PhaseAnnotation& ann) {
  ann.validate();
  const double s = ann.implantation_start, e = ann.implantation_end, d = ann.video_duration;
  check(e - s >= kClipSeconds, ErrorKind::validation,
        "degenerate phase: implantation interval of " + ann.video_id + " is " +
            std::to_string(e - s) + " s, need at least " + std::to_string(kClipSeconds));
  check(s >= kPreRestClips * kMinRestClipSeconds, ErrorKind::validation,
        "insufficient context: pre-phase segment of " + ann.video_id + " is " +
            std::to_string(s) + " s, need at least " +
            std::to_string(kPreRestClips * kMinRestClipSeconds));
  check(d - e >= kPostRestClips * kMinRestClipSeconds, ErrorKind::validation,
        "insufficient context: post-phase segment of " + ann.video_id + " is " +
            std::to_string(d - e) + " s, need at least " +
            std::to_string(kPostRestClips * kMinRestClipSeconds));
  std::vector<ClipSpec> out;
  out.reserve(kPreRestClips + kImplantationClips + kPostRestClips);
  for (int i = 0; i < kPreRestClips; ++i)
    out.push_back({ann.video_id, s * i / kPreRestClips, s * (i + 1) / kPreRestClips,
                   ClipLabel::rest});
  const double span = (e - kClipSeconds) - s;
  for (int i = 0; i < kImplantationClips; ++i) {
    const double st = s + span * i / (kImplantationClips - 1);
    out.push_back({ann.video_id, st, st + kClipSeconds, ClipLabel::implantation});
  }
  for (int i = 0; i < kPostRestClips; ++i)
    out.push_back({ann.video_id, e + (d - e) * i / kPostRestClips,
                   e + (d - e) * (i + 1) / kPostRestClips, ClipLabel::rest});
  return out;
}

struct PartitionReport {
  std::vector<ClipSpec> specs;
  std::vector<std::string> skipped; // one warning per rejected video
};

/// Partition every annotated video, skipping (and reporting) the ones whose
/// segments are too short instead of aborting the whole dataset.
inline PartitionReport partition_all(const std::vector<data::PhaseAnnotation>& anns) {
  PartitionReport report;
  for (const auto& ann : anns) {
    try {
      auto specs = partition_video(ann);
      report.specs.insert(report.specs.end(), specs.begin(), specs.end());
    } catch (const ValidationError& e) {
      report.skipped.push_back(e.what());
    }
  }
  return report;
}

/// Draw the frame indices for one training sequence: a 3-second window
/// placed uniformly inside the clip (the whole clip when it is shorter),
/// split into n equal sub-windows, one frame uniform per sub-window.
/// Pure function of (spec, frame_count, fps, n, seed).
inline std::vector<std::int64_t> sample_frame_indices(const ClipSpec& spec,
                                                      std::int64_t frame_count, double fps,
                                                      std::int64_t n, std::uint64_t seed) {
  check(n >= 1, ErrorKind::config, "sequence length must be >= 1");
  check(fps > 0, ErrorKind::validation, "fps must be > 0");
  Rng rng(seed);
  const double len = spec.length();
  check(len > 0, ErrorKind::validation, "empty clip for video " + spec.video_id);
  const double win = std::min(kClipSeconds, len);
  const double w0 = spec.start + rng.uniform() * (len - win);
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const double a = w0 + win * double(k) / double(n);
    const double b = w0 + win * double(k + 1) / double(n);
    // frames j with a <= j/fps < b
    std::int64_t lo = static_cast<std::int64_t>(std::ceil(a * fps));
    std::int64_t hi = static_cast<std::int64_t>(std::ceil(b * fps));
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min(hi, frame_count);
    check(hi > lo, ErrorKind::validation,
          "sparse video: no frame of " + spec.video_id + " falls in sub-window " +
              std::to_string(k) + " [" + std::to_string(a) + ", " + std::to_string(b) + ") s");
    out.push_back(lo + static_cast<std::int64_t>(rng.uniform_int(std::uint64_t(hi - lo))));
  }
  return out;
}

struct ClipSample {
  std::vector<data::ImageTensor> frames;
  std::vector<std::int64_t> frame_indices;
  std::vector<double> timestamps; // seconds, strictly increasing
  ClipLabel label = ClipLabel::rest;
  ClipSpec spec;
  std::uint64_t rng_seed = 0;
};

inline ClipSample sample_training_sequence(const ClipSpec& spec, const data::VideoFrames& video,
                                           std::int64_t n, std::uint64_t seed) {
  ClipSample sample;
  sample.spec = spec;
  sample.label = spec.label;
  sample.rng_seed = seed;
  sample.frame_indices = sample_frame_indices(spec, video.frame_count(), video.fps(), n, seed);
  for (std::int64_t j : sample.frame_indices) {
    sample.frames.push_back(video.frame(j));
    sample.timestamps.push_back(double(j) / video.fps());
  }
  return sample;
}

/// One shuffled epoch over all specs; 12 Implantation and 12 Rest samples
/// per partitioned video, so classes stay balanced by construction. Each
/// sample's window/frame draw gets its own seed split from the root seed.
inline std::vector<ClipSample> build_balanced_epoch(
    const std::vector<ClipSpec>& specs,
    const std::map<std::string, std::shared_ptr<data::VideoFrames>>& videos, std::int64_t n,
    std::uint64_t seed) {
  Rng root(seed);
  std::vector<ClipSample> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto it = videos.find(specs[i].video_id);
    check(it != videos.end(), ErrorKind::validation,
          "no frame source for video " + specs[i].video_id);
    const std::uint64_t sample_seed = root.split(i).next_u64();
    out.push_back(sample_training_sequence(specs[i], *it->second, n, sample_seed));
  }
  Rng shuffle = root.split("shuffle");
  for (std::int64_t i = static_cast<std::int64_t>(out.size()) - 1; i > 0; --i)
    std::swap(out[static_cast<std::size_t>(i)],
              out[shuffle.uniform_int(std::uint64_t(i + 1))]);
  return out;
}

inline void save_clip_specs(const std::vector<ClipSpec>& specs, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), ErrorKind::io, "cannot write clips: " + path);
  for (const auto& c : specs) {
    nlohmann::json j{{"video", c.video_id},
                     {"start_s", c.start},
                     {"end_s", c.end},
                     {"label", to_string(c.label)}};
    out << j.dump() << '\n';
  }
}

inline std::vector<ClipSpec> load_clip_specs(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), ErrorKind::io, "cannot open clips: " + path);
  std::vector<ClipSpec> out;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClipSpec c;
      c.video_id = j.at("video").get<std::string>();
      c.start = j.at("start_s").get<double>();
      c.end = j.at("end_s").get<double>();
      c.label = clip_label_from_string(j.at("label").get<std::string>());
      check(c.end > c.start, ErrorKind::validation, "clip with end <= start");
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError("clips " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

} // namespace lensid::clips
