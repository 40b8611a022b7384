#pragma once

#include <filesystem>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <set>

#include "lensid/data/image.hpp"

namespace lensid::data {

/// Load an 8-bit image file as RGB, scale to [0,1], and bilinear-resize to
/// target_size x target_size. Deterministic: same file bytes, same tensor.
inline ImageTensor load_image(const std::string& path, std::int64_t target_size) {
  check(std::filesystem::exists(path), ErrorKind::io, "image file not found: " + path);
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  check(!bgr.empty(), ErrorKind::decode, "cannot decode image: " + path);
  check(bgr.depth() == CV_8U, ErrorKind::decode, "image is not 8-bit: " + path);
  const std::int64_t h = bgr.rows, w = bgr.cols;
  Tensor<float> chw({3, h, w});
  for (std::int64_t y = 0; y < h; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::int64_t x = 0; x < w; ++x) {
      const cv::Vec3b px = row[x];
      chw(0, y, x) = float(px[2]) / 255.0f; // R
      chw(1, y, x) = float(px[1]) / 255.0f; // G
      chw(2, y, x) = float(px[0]) / 255.0f; // B
    }
  }
  if (h == target_size && w == target_size) return ImageTensor(std::move(chw));
  return ImageTensor(resize_bilinear_chw(chw, target_size, target_size));
}

/// Load a {0,255}-coded mask, nearest-resize, and map to {0,1} labels.
/// Any other pixel value is a validation error that lists the offenders.
inline MaskImage load_mask(const std::string& path, std::int64_t target_size) {
  check(std::filesystem::exists(path), ErrorKind::io, "mask file not found: " + path);
  cv::Mat raw = cv::imread(path, cv::IMREAD_GRAYSCALE);
  check(!raw.empty(), ErrorKind::decode, "cannot decode mask: " + path);
  check(raw.depth() == CV_8U, ErrorKind::decode, "mask is not 8-bit: " + path);
  const std::int64_t h = raw.rows, w = raw.cols;
  Tensor<std::uint8_t> grid({h, w});
  std::set<int> offending;
  for (std::int64_t y = 0; y < h; ++y) {
    const std::uint8_t* row = raw.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::int64_t x = 0; x < w; ++x) {
      const std::uint8_t v = row[x];
      if (v != 0 && v != 255)
        offending.insert(v);
      else
        grid(y, x) = v == 255 ? 1 : 0;
    }
  }
  if (!offending.empty()) {
    std::ostringstream os;
    os << "mask " << path << " contains values outside {0,255}:";
    int listed = 0;
    for (int v : offending) {
      os << ' ' << v;
      if (++listed == 16 && offending.size() > 16) {
        os << " ... (" << offending.size() << " distinct values)";
        break;
      }
    }
    throw ValidationError(os.str());
  }
  if (h == target_size && w == target_size) return MaskImage(std::move(grid));
  return MaskImage(resize_nearest_hw(grid, target_size, target_size));
}

/// Write a mask as single-channel PNG with {0,255} coding.
inline void save_mask(const MaskImage& mask, const std::string& path) {
  cv::Mat out(static_cast<int>(mask.height()), static_cast<int>(mask.width()), CV_8U);
  for (std::int64_t y = 0; y < mask.height(); ++y)
    for (std::int64_t x = 0; x < mask.width(); ++x)
      out.at<std::uint8_t>(static_cast<int>(y), static_cast<int>(x)) =
          mask.labels()(y, x) ? 255 : 0;
  check(cv::imwrite(path, out), ErrorKind::io, "cannot write mask: " + path);
}

/// Write a (3,H,W) [0,1] image as 8-bit PNG (clipping out-of-range values).
inline void save_image(const Tensor<float>& chw, const std::string& path) {
  check(chw.rank() == 3 && chw.dim(0) == 3, ErrorKind::shape, "save_image: need (3,H,W)");
  const std::int64_t h = chw.dim(1), w = chw.dim(2);
  cv::Mat out(static_cast<int>(h), static_cast<int>(w), CV_8UC3);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      auto q = [&](int c) {
        const float v = std::clamp(chw(c, y, x), 0.0f, 1.0f);
        return static_cast<std::uint8_t>(std::lround(v * 255.0f));
      };
      out.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x)) = cv::Vec3b(q(2), q(1), q(0));
    }
  check(cv::imwrite(path, out), ErrorKind::io, "cannot write image: " + path);
}

} // namespace lensid::data
