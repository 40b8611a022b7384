#pragma once

#include <set>
#include <sstream>
#include <string>

#include "lensid/core/resample.hpp"
#include "lensid/core/tensor.hpp"

namespace lensid::data {

/// RGB image as a (3, H, W) float tensor with square spatial extent and
/// values in [0,1] (backbone standardization is applied later, by the model
/// that knows its own convention).
class ImageTensor {
public:
  ImageTensor() = default;

  explicit ImageTensor(Tensor<float> chw) : values_(std::move(chw)) {
    check(values_.rank() == 3 && values_.dim(0) == 3, ErrorKind::shape,
          "image must be (3,H,W), got " + shape_str(values_.shape()));
    check(values_.dim(1) == values_.dim(2), ErrorKind::validation,
          "image must be square, got " + shape_str(values_.shape()));
    check(values_.all_finite(), ErrorKind::validation, "image contains non-finite values");
  }

  std::int64_t height() const { return values_.dim(1); }
  std::int64_t width() const { return values_.dim(2); }
  std::int64_t channels() const { return 3; }
  const Tensor<float>& values() const { return values_; }
  Tensor<float>& values() { return values_; }

  ImageTensor resized(std::int64_t target) const {
    return ImageTensor(resize_bilinear_chw(values_, target, target));
  }

private:
  Tensor<float> values_;
};

/// Binary label grid; every pixel is 0 or 1.
class MaskImage {
public:
  MaskImage() = default;

  explicit MaskImage(Tensor<std::uint8_t> labels) : labels_(std::move(labels)) {
    check(labels_.rank() == 2, ErrorKind::shape,
          "mask must be (H,W), got " + shape_str(labels_.shape()));
    for (std::int64_t i = 0; i < labels_.numel(); ++i)
      check(labels_[i] <= 1, ErrorKind::validation, "mask label out of {0,1}");
  }

  std::int64_t height() const { return labels_.dim(0); }
  std::int64_t width() const { return labels_.dim(1); }
  const Tensor<std::uint8_t>& labels() const { return labels_; }

  std::int64_t foreground_count() const {
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < labels_.numel(); ++i) n += labels_[i];
    return n;
  }

  MaskImage resized(std::int64_t target) const {
    return MaskImage(resize_nearest_hw(labels_, target, target));
  }

private:
  Tensor<std::uint8_t> labels_;
};

struct SegSample {
  ImageTensor image;
  MaskImage mask;
  std::string video_id;
  std::int64_t frame_index = 0;

  void validate() const {
    check(image.height() == mask.height() && image.width() == mask.width(),
          ErrorKind::validation,
          "image and mask are not spatially aligned for video " + video_id);
    check(frame_index >= 0, ErrorKind::validation, "negative frame index");
  }
};

} // namespace lensid::data
