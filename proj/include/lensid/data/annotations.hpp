#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lensid/core/errors.hpp"

namespace lensid::data {

/// The labelled lens-implantation interval of one video.
struct PhaseAnnotation {
  std::string video_id;
  double implantation_start = 0; // seconds
  double implantation_end = 0;   // seconds
  double video_duration = 0;     // seconds
  double fps = 0;

  void validate() const {
    check(!video_id.empty(), ErrorKind::validation, "annotation with empty video_id");
    check(fps > 0, ErrorKind::validation, "annotation for " + video_id + ": fps must be > 0");
    check(implantation_start >= 0 && implantation_start < implantation_end &&
              implantation_end <= video_duration,
          ErrorKind::validation,
          "annotation for " + video_id + ": need 0 <= start < end <= duration, got start=" +
              std::to_string(implantation_start) + " end=" + std::to_string(implantation_end) +
              " duration=" + std::to_string(video_duration));
  }
};

inline constexpr const char* kAnnotationHeader = "video_id,start_s,end_s,duration_s,fps";

inline std::vector<PhaseAnnotation> load_annotations(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), ErrorKind::io, "cannot open annotations: " + path);
  std::string line;
  check(static_cast<bool>(std::getline(in, line)), ErrorKind::decode,
        "annotations file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  check(line == kAnnotationHeader, ErrorKind::decode,
        "annotations " + path + ": expected header '" + std::string(kAnnotationHeader) +
            "', got '" + line + "'");
  std::vector<PhaseAnnotation> out;
  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    PhaseAnnotation a;
    std::string field;
    auto next = [&](const char* what) {
      check(static_cast<bool>(std::getline(ss, field, ',')), ErrorKind::decode,
            "annotations " + path + " line " + std::to_string(line_no) + ": missing " + what);
      return field;
    };
    auto next_num = [&](const char* what) {
      const std::string f = next(what);
      try {
        std::size_t used = 0;
        const double v = std::stod(f, &used);
        check(used == f.size(), ErrorKind::decode, "trailing junk");
        return v;
      } catch (const std::exception&) {
        throw DecodeError("annotations " + path + " line " + std::to_string(line_no) +
                          ": cannot parse " + std::string(what) + " from '" + f + "'");
      }
    };
    a.video_id = next("video_id");
    a.implantation_start = next_num("start_s");
    a.implantation_end = next_num("end_s");
    a.video_duration = next_num("duration_s");
    a.fps = next_num("fps");
    a.validate();
    out.push_back(std::move(a));
  }
  return out;
}

inline void save_annotations(const std::vector<PhaseAnnotation>& anns, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), ErrorKind::io, "cannot write annotations: " + path);
  out << kAnnotationHeader << '\n';
  for (const auto& a : anns)
    out << a.video_id << ',' << a.implantation_start << ',' << a.implantation_end << ','
        << a.video_duration << ',' << a.fps << '\n';
}

} // namespace lensid::data
