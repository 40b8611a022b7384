#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "lensid/core/errors.hpp"

namespace lensid::data {

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DecodeError("unknown split: " + s);
}

struct ManifestEntry {
  std::string image;
  std::string mask;
  std::string video;
  std::int64_t frame = 0;
  Split split = Split::train;
};

/// Dataset listing. Serialized as JSON lines; each line has keys
/// image, mask, video, frame, split.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split_entries(Split s) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.split == s) out.push_back(e);
    return out;
  }

  std::set<std::string> videos(Split s) const {
    std::set<std::string> out;
    for (const auto& e : entries)
      if (e.split == s) out.insert(e.video);
    return out;
  }
};

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), ErrorKind::io, "cannot open manifest: " + path);
  DatasetManifest m;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError("manifest " + path + " line " + std::to_string(line_no) + ": " +
                        e.what());
    }
    try {
      ManifestEntry e;
      e.image = j.at("image").get<std::string>();
      e.mask = j.at("mask").get<std::string>();
      e.video = j.at("video").get<std::string>();
      e.frame = j.at("frame").get<std::int64_t>();
      e.split = split_from_string(j.at("split").get<std::string>());
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError("manifest " + path + " line " + std::to_string(line_no) +
                        ": missing or mistyped key (" + e.what() + ")");
    }
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), ErrorKind::io, "cannot write manifest: " + path);
  for (const auto& e : m.entries) {
    nlohmann::json j{{"image", e.image},
                     {"mask", e.mask},
                     {"video", e.video},
                     {"frame", e.frame},
                     {"split", to_string(e.split)}};
    out << j.dump() << '\n';
  }
}

/// Check a manifest for structural problems. Returns one message per
/// violation; an empty report means the manifest is usable. File-level
/// checks (existence, image/mask size agreement) can be skipped for speed.
inline std::vector<std::string> validate_manifest(const DatasetManifest& m,
                                                  bool check_files = true) {
  std::vector<std::string> report;
  for (Split s : {Split::train, Split::test})
    if (m.split_entries(s).empty()) report.push_back("empty split: " + to_string(s));
  std::set<std::string> leaked;
  const auto train_videos = m.videos(Split::train);
  for (const auto& v : m.videos(Split::test))
    if (train_videos.count(v)) leaked.insert(v);
  for (const auto& v : leaked) report.push_back("split leakage: " + v);
  for (const auto& e : m.entries) {
    if (e.frame < 0)
      report.push_back("negative frame index: " + e.video + "#" + std::to_string(e.frame));
    if (!check_files) continue;
    const bool have_image = std::filesystem::exists(e.image);
    const bool have_mask = std::filesystem::exists(e.mask);
    if (!have_image) report.push_back("missing file: " + e.image);
    if (!have_mask) report.push_back("missing file: " + e.mask);
    if (have_image && have_mask) {
      cv::Mat img = cv::imread(e.image, cv::IMREAD_UNCHANGED);
      cv::Mat msk = cv::imread(e.mask, cv::IMREAD_UNCHANGED);
      if (img.empty())
        report.push_back("undecodable image: " + e.image);
      else if (msk.empty())
        report.push_back("undecodable mask: " + e.mask);
      else if (img.rows != msk.rows || img.cols != msk.cols)
        report.push_back("size mismatch: " + e.image + " is " + std::to_string(img.cols) + "x" +
                         std::to_string(img.rows) + " but " + e.mask + " is " +
                         std::to_string(msk.cols) + "x" + std::to_string(msk.rows));
    }
  }
  return report;
}

} // namespace lensid::data
