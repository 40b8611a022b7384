#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lensid/nn/layers.hpp"

namespace lensid::models {

// Per-channel standardization applied to [0,1] RGB input. Each backbone
// carries its own constants so callers never hard-code them.
struct ImageStats {
  std::array<double, 3> mean;
  std::array<double, 3> std;
};

inline ImageStats imagenet_stats() {
  return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
}

inline ImageStats unit_stats() { return {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}}; }

template <class T>
Tensor<T> standardize(const Tensor<T>& x, const ImageStats& s) {
  check(x.rank() == 4 && x.dim(1) == 3, ErrorKind::shape,
        "standardize: input must be (N,3,H,W)");
  Tensor<T> out(x.shape());
  const std::int64_t hw = x.dim(2) * x.dim(3);
  for (std::int64_t n = 0; n < x.dim(0); ++n)
    for (std::int64_t c = 0; c < 3; ++c) {
      const T* src = x.data() + (n * 3 + c) * hw;
      T* dst = out.data() + (n * 3 + c) * hw;
      const T m = T(s.mean[std::size_t(c)]), inv = T(1.0 / s.std[std::size_t(c)]);
      for (std::int64_t i = 0; i < hw; ++i) dst[i] = (src[i] - m) * inv;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation encoders: a stack of conv stages with 2x2 pooling between
// them. The output of each of the first four stages is kept as a skip
// connection (strides 1, 2, 4, 8); the final stage output is the bottleneck
// at stride 16.

enum class SegEncoderKind { vgg16, tiny_desk };

inline SegEncoderKind seg_encoder_kind_from_string(const std::string& s) {
  if (s == "VGG16" || s == "vgg16") return SegEncoderKind::vgg16;
  if (s == "TinyDesk" || s == "tiny_desk" || s == "tinydesk") return SegEncoderKind::tiny_desk;
  check(false, ErrorKind::config, "unknown encoder: " + s);
  return SegEncoderKind::vgg16;
}

inline std::string to_string(SegEncoderKind k) {
  return k == SegEncoderKind::vgg16 ? "VGG16" : "TinyDesk";
}

template <class T>
struct EncoderTaps {
  std::vector<ag::Var<T>> skips;  // strides 1, 2, 4, 8
  ag::Var<T> bottleneck;          // stride 16
};

template <class T>
class SegEncoder {
 public:
  static constexpr std::int64_t kStride = 16;

  SegEncoder(SegEncoderKind kind, Rng& rng) : kind_(kind) {
    const auto stages = stage_widths(kind);
    std::int64_t in_ch = 3;
    for (const auto& stage : stages) {
      for (std::int64_t width : stage) {
        convs_.emplace_back(in_ch, width, 3, 1, 1, rng);
        in_ch = width;
      }
      stage_end_.push_back(convs_.size());
    }
  }

  SegEncoderKind kind() const { return kind_; }
  ImageStats stats() const {
    return kind_ == SegEncoderKind::vgg16 ? imagenet_stats() : unit_stats();
  }

  std::vector<std::int64_t> skip_channels() const {
    std::vector<std::int64_t> out;
    const auto stages = stage_widths(kind_);
    for (std::size_t s = 0; s + 1 < stages.size(); ++s) out.push_back(stages[s].back());
    return out;
  }
  std::int64_t bottleneck_channels() const { return stage_widths(kind_).back().back(); }

  EncoderTaps<T> forward(const ag::Var<T>& x) const {
    check(x->value.rank() == 4 && x->value.dim(1) == 3, ErrorKind::shape,
          "encoder: input must be (N,3,H,W)");
    check(x->value.dim(2) % kStride == 0 && x->value.dim(3) % kStride == 0, ErrorKind::shape,
          "encoder: spatial size must be divisible by 16, got " +
              std::to_string(x->value.dim(2)) + "x" + std::to_string(x->value.dim(3)));
    EncoderTaps<T> taps;
    ag::Var<T> h = x;
    std::size_t conv = 0;
    for (std::size_t s = 0; s < stage_end_.size(); ++s) {
      for (; conv < stage_end_[s]; ++conv) h = ag::relu(convs_[conv].forward(h));
      if (s + 1 < stage_end_.size()) {
        taps.skips.push_back(h);
        h = ag::max_pool2d_2x2(h);
      } else {
        taps.bottleneck = h;
      }
    }
    return taps;
  }

  void params(const std::string& prefix, nn::NamedParams<T>& out) const {
    for (std::size_t i = 0; i < convs_.size(); ++i)
      convs_[i].params(nn::join_name(prefix, "conv" + std::to_string(i)), out);
  }
  void state(const std::string& prefix, nn::NamedTensors<T>& out) const {
    for (std::size_t i = 0; i < convs_.size(); ++i)
      convs_[i].state(nn::join_name(prefix, "conv" + std::to_string(i)), out);
  }

 private:
  static std::vector<std::vector<std::int64_t>> stage_widths(SegEncoderKind kind) {
    if (kind == SegEncoderKind::vgg16)
      return {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
    return {{8}, {16}, {24}, {32}, {32}};
  }

  SegEncoderKind kind_;
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<std::size_t> stage_end_;
};

// ---------------------------------------------------------------------------
// Phase-classifier backbones: map a batch of frames (N,3,H,W) to a feature
// vector (N,F) via global average pooling over the last feature map.

enum class PhaseBackboneKind { vgg19, resnet50, tiny_desk };

inline PhaseBackboneKind phase_backbone_from_string(const std::string& s) {
  if (s == "VGG19" || s == "vgg19") return PhaseBackboneKind::vgg19;
  if (s == "ResNet50" || s == "resnet50") return PhaseBackboneKind::resnet50;
  if (s == "TinyDesk" || s == "tiny_desk" || s == "tinydesk") return PhaseBackboneKind::tiny_desk;
  check(false, ErrorKind::config, "unknown backbone: " + s);
  return PhaseBackboneKind::vgg19;
}

inline std::string to_string(PhaseBackboneKind k) {
  switch (k) {
    case PhaseBackboneKind::vgg19: return "VGG19";
    case PhaseBackboneKind::resnet50: return "ResNet50";
    default: return "TinyDesk";
  }
}

namespace detail {

// 1x1 reduce -> 3x3 (carries the stride) -> 1x1 expand, with a projection
// shortcut whenever shape changes.
template <class T>
struct ResBottleneck {
  nn::Conv2d<T> c1, c2, c3, proj;
  nn::BatchNorm2d<T> b1, b2, b3, bproj;
  bool has_proj = false;

  ResBottleneck() = default;
  ResBottleneck(std::int64_t in_ch, std::int64_t mid_ch, std::int64_t stride, Rng& rng) {
    const std::int64_t out_ch = mid_ch * 4;
    c1 = nn::Conv2d<T>(in_ch, mid_ch, 1, 1, 0, rng, 1, false);
    c2 = nn::Conv2d<T>(mid_ch, mid_ch, 3, stride, 1, rng, 1, false);
    c3 = nn::Conv2d<T>(mid_ch, out_ch, 1, 1, 0, rng, 1, false);
    b1 = nn::BatchNorm2d<T>(mid_ch);
    b2 = nn::BatchNorm2d<T>(mid_ch);
    b3 = nn::BatchNorm2d<T>(out_ch);
    has_proj = stride != 1 || in_ch != out_ch;
    if (has_proj) {
      proj = nn::Conv2d<T>(in_ch, out_ch, 1, stride, 0, rng, 1, false);
      bproj = nn::BatchNorm2d<T>(out_ch);
    }
  }

  ag::Var<T> forward(const ag::Var<T>& x, bool training) const {
    ag::Var<T> h = ag::relu(b1.forward(c1.forward(x), training));
    h = ag::relu(b2.forward(c2.forward(h), training));
    h = b3.forward(c3.forward(h), training);
    ag::Var<T> sc = has_proj ? bproj.forward(proj.forward(x), training) : x;
    return ag::relu(ag::add(h, sc));
  }

  void params(const std::string& p, nn::NamedParams<T>& out) const {
    c1.params(nn::join_name(p, "c1"), out);
    b1.params(nn::join_name(p, "b1"), out);
    c2.params(nn::join_name(p, "c2"), out);
    b2.params(nn::join_name(p, "b2"), out);
    c3.params(nn::join_name(p, "c3"), out);
    b3.params(nn::join_name(p, "b3"), out);
    if (has_proj) {
      proj.params(nn::join_name(p, "proj"), out);
      bproj.params(nn::join_name(p, "bproj"), out);
    }
  }
  void state(const std::string& p, nn::NamedTensors<T>& out) const {
    c1.state(nn::join_name(p, "c1"), out);
    b1.state(nn::join_name(p, "b1"), out);
    c2.state(nn::join_name(p, "c2"), out);
    b2.state(nn::join_name(p, "b2"), out);
    c3.state(nn::join_name(p, "c3"), out);
    b3.state(nn::join_name(p, "b3"), out);
    if (has_proj) {
      proj.state(nn::join_name(p, "proj"), out);
      bproj.state(nn::join_name(p, "bproj"), out);
    }
  }
  void buffers(const std::string& p, nn::NamedTensors<T>& out) const {
    b1.buffers(nn::join_name(p, "b1"), out);
    b2.buffers(nn::join_name(p, "b2"), out);
    b3.buffers(nn::join_name(p, "b3"), out);
    if (has_proj) bproj.buffers(nn::join_name(p, "bproj"), out);
  }
};

} // namespace detail

template <class T>
class PhaseBackbone {
 public:
  PhaseBackbone(PhaseBackboneKind kind, Rng& rng) : kind_(kind) {
    switch (kind) {
      case PhaseBackboneKind::vgg19:
        build_conv_stack({{64, 64}, {128, 128}, {256, 256, 256, 256},
                          {512, 512, 512, 512}, {512, 512, 512, 512}},
                         rng);
        feature_dim_ = 512;
        break;
      case PhaseBackboneKind::tiny_desk:
        build_conv_stack({{16}, {32}, {64}, {96}}, rng);
        feature_dim_ = 96;
        break;
      case PhaseBackboneKind::resnet50: {
        stem_ = nn::Conv2d<T>(3, 64, 7, 2, 3, rng, 1, false);
        stem_bn_ = nn::BatchNorm2d<T>(64);
        const std::int64_t mids[4] = {64, 128, 256, 512};
        const int counts[4] = {3, 4, 6, 3};
        std::int64_t in_ch = 64;
        for (int stage = 0; stage < 4; ++stage)
          for (int i = 0; i < counts[stage]; ++i) {
            const std::int64_t stride = (stage > 0 && i == 0) ? 2 : 1;
            blocks_.emplace_back(in_ch, mids[stage], stride, rng);
            in_ch = mids[stage] * 4;
          }
        feature_dim_ = 2048;
        break;
      }
    }
  }

  PhaseBackboneKind kind() const { return kind_; }
  std::int64_t feature_dim() const { return feature_dim_; }
  ImageStats stats() const {
    return kind_ == PhaseBackboneKind::tiny_desk ? unit_stats() : imagenet_stats();
  }

  /// (N,3,H,W) -> (N,feature_dim) via global average pooling.
  ag::Var<T> forward(const ag::Var<T>& x, bool training) const {
    check(x->value.rank() == 4 && x->value.dim(1) == 3, ErrorKind::shape,
          "backbone: input must be (N,3,H,W)");
    ag::Var<T> h = x;
    if (kind_ == PhaseBackboneKind::resnet50) {
      check(x->value.dim(2) >= 32 && x->value.dim(3) >= 32, ErrorKind::shape,
            "backbone: ResNet50 input must be at least 32x32");
      h = ag::relu(stem_bn_.forward(stem_.forward(h), training));
      h = ag::max_pool2d(h, 3, 2, 1);
      for (const auto& block : blocks_) h = block.forward(h, training);
    } else {
      std::size_t conv = 0;
      for (std::size_t s = 0; s < stage_end_.size(); ++s) {
        for (; conv < stage_end_[s]; ++conv) h = ag::relu(convs_[conv].forward(h));
        if (h->value.dim(2) >= 2 && h->value.dim(3) >= 2) h = ag::max_pool2d_2x2(h);
      }
    }
    h = ag::global_avg_pool(h);
    return ag::reshape(h, {h->value.dim(0), feature_dim_});
  }

  void params(const std::string& prefix, nn::NamedParams<T>& out) const {
    if (kind_ == PhaseBackboneKind::resnet50) {
      stem_.params(nn::join_name(prefix, "stem"), out);
      stem_bn_.params(nn::join_name(prefix, "stem_bn"), out);
      for (std::size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].params(nn::join_name(prefix, "block" + std::to_string(i)), out);
    } else {
      for (std::size_t i = 0; i < convs_.size(); ++i)
        convs_[i].params(nn::join_name(prefix, "conv" + std::to_string(i)), out);
    }
  }
  void state(const std::string& prefix, nn::NamedTensors<T>& out) const {
    if (kind_ == PhaseBackboneKind::resnet50) {
      stem_.state(nn::join_name(prefix, "stem"), out);
      stem_bn_.state(nn::join_name(prefix, "stem_bn"), out);
      for (std::size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].state(nn::join_name(prefix, "block" + std::to_string(i)), out);
    } else {
      for (std::size_t i = 0; i < convs_.size(); ++i)
        convs_[i].state(nn::join_name(prefix, "conv" + std::to_string(i)), out);
    }
  }
  void buffers(const std::string& prefix, nn::NamedTensors<T>& out) const {
    if (kind_ != PhaseBackboneKind::resnet50) return;
    stem_bn_.buffers(nn::join_name(prefix, "stem_bn"), out);
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].buffers(nn::join_name(prefix, "block" + std::to_string(i)), out);
  }

 private:
  void build_conv_stack(const std::vector<std::vector<std::int64_t>>& stages, Rng& rng) {
    std::int64_t in_ch = 3;
    for (const auto& stage : stages) {
      for (std::int64_t width : stage) {
        convs_.emplace_back(in_ch, width, 3, 1, 1, rng);
        in_ch = width;
      }
      stage_end_.push_back(convs_.size());
    }
  }

  PhaseBackboneKind kind_;
  std::int64_t feature_dim_ = 0;
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<std::size_t> stage_end_;
  nn::Conv2d<T> stem_;
  nn::BatchNorm2d<T> stem_bn_;
  std::vector<detail::ResBottleneck<T>> blocks_;
};

template <class T>
std::int64_t count_params(const nn::NamedParams<T>& params) {
  std::int64_t n = 0;
  for (const auto& [name, v] : params) n += v->value.numel();
  return n;
}

} // namespace lensid::models
