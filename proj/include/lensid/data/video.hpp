#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lensid/data/image_io.hpp"

namespace lensid::data {

/// Frame source abstraction: anything that can hand out decoded frames by
/// index. Keeps video codecs out of the core; clinical footage is ingested
/// as frame directories, tests synthesize frames on the fly.
class VideoFrames {
public:
  virtual ~VideoFrames() = default;
  virtual std::int64_t frame_count() const = 0;
  virtual double fps() const = 0;
  virtual ImageTensor frame(std::int64_t index) const = 0;

  double duration_s() const { return double(frame_count()) / fps(); }
};

/// A directory of image files, one per frame, ordered by filename.
class FrameDirectory : public VideoFrames {
public:
  FrameDirectory(const std::string& dir, double fps, std::int64_t target_size)
      : fps_(fps), target_size_(target_size) {
    check(fps > 0, ErrorKind::validation, "fps must be > 0");
    check(std::filesystem::is_directory(dir), ErrorKind::io, "not a directory: " + dir);
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension().string();
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
        files_.push_back(entry.path().string());
    }
    std::sort(files_.begin(), files_.end());
    check(!files_.empty(), ErrorKind::validation, "no frames found in " + dir);
  }

  std::int64_t frame_count() const override { return static_cast<std::int64_t>(files_.size()); }
  double fps() const override { return fps_; }

  ImageTensor frame(std::int64_t index) const override {
    check(index >= 0 && index < frame_count(), ErrorKind::validation,
          "frame index out of range: " + std::to_string(index));
    return load_image(files_[static_cast<std::size_t>(index)], target_size_);
  }

  const std::vector<std::string>& files() const { return files_; }

private:
  std::vector<std::string> files_;
  double fps_ = 0;
  std::int64_t target_size_ = 0;
};

/// Frames computed by a function; used by tests and synthetic fixtures.
class SyntheticVideo : public VideoFrames {
public:
  SyntheticVideo(std::int64_t frame_count, double fps,
                 std::function<ImageTensor(std::int64_t)> make_frame)
      : count_(frame_count), fps_(fps), make_frame_(std::move(make_frame)) {
    check(frame_count >= 0 && fps > 0, ErrorKind::validation, "bad synthetic video parameters");
  }

  std::int64_t frame_count() const override { return count_; }
  double fps() const override { return fps_; }
  ImageTensor frame(std::int64_t index) const override {
    check(index >= 0 && index < count_, ErrorKind::validation,
          "frame index out of range: " + std::to_string(index));
    return make_frame_(index);
  }

private:
  std::int64_t count_ = 0;
  double fps_ = 0;
  std::function<ImageTensor(std::int64_t)> make_frame_;
};

} // namespace lensid::data
