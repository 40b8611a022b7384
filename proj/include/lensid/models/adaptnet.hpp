#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lensid/models/backbones.hpp"
#include "lensid/nn/layers.hpp"

namespace lensid::models {

struct AdaptNetConfig {
  std::string encoder = "VGG16";
  std::vector<std::int64_t> decoder_channels = {256, 128, 64, 32};
  bool enable_ssf = true;
  bool enable_sha = true;
  bool enable_cpf = true;
  std::int64_t cascade_depth = 3;  // conv blocks fused by the scale-adaptive stage
  double offset_bound = 3.0;       // max deformable offset magnitude, pixels
  std::int64_t num_classes = 2;

  void validate() const {
    seg_encoder_kind_from_string(encoder);
    check(!enable_sha || enable_ssf, ErrorKind::config,
          "config: enable_sha requires enable_ssf");
    check(decoder_channels.size() == 4, ErrorKind::config,
          "config: decoder_channels must list 4 stages");
    for (std::int64_t d : decoder_channels)
      check(d >= 1, ErrorKind::config, "config: decoder channels must be positive");
    check(cascade_depth >= 2, ErrorKind::config, "config: cascade_depth must be >= 2");
    check(offset_bound > 0.0, ErrorKind::config, "config: offset_bound must be positive");
    check(num_classes == 2, ErrorKind::config, "config: num_classes must be 2");
  }
};

// 3x3 conv + layer normalization + ReLU. Normalization can be switched off
// so tests can probe the pure convolutional path (receptive field, identity
// kernels); the network always builds it on.
template <class T>
struct ConvBlock {
  nn::Conv2d<T> conv;
  nn::LayerNorm<T> norm;
  bool use_norm = true;

  ConvBlock() = default;
  ConvBlock(std::int64_t in_ch, std::int64_t out_ch, Rng& rng, bool use_norm_ = true)
      : conv(in_ch, out_ch, 3, 1, 1, rng), norm(out_ch), use_norm(use_norm_) {}

  ag::Var<T> forward(const ag::Var<T>& x) const {
    ag::Var<T> h = conv.forward(x);
    if (use_norm) h = norm.forward(h);
    return ag::relu(h);
  }

  void params(const std::string& p, nn::NamedParams<T>& out) const {
    conv.params(nn::join_name(p, "conv"), out);
    if (use_norm) norm.params(nn::join_name(p, "norm"), out);
  }
  void state(const std::string& p, nn::NamedTensors<T>& out) const {
    conv.state(nn::join_name(p, "conv"), out);
    if (use_norm) norm.state(nn::join_name(p, "norm"), out);
  }
};

// Feature-fusion decision: every branch goes through one shared 3x3
// convolution (S_b) and one shared 1x1 convolution producing a per-pixel
// logit; a softmax across branches turns the logits into weights and the
// output is the weighted sum of the S_b.
template <class T>
class Ffd {
 public:
  Ffd() = default;
  Ffd(std::int64_t channels, Rng& rng)
      : feat_(channels, channels, 3, 1, 1, rng), gate_(channels, 1, 1, 1, 0, rng) {}

  ag::Var<T> fuse(const std::vector<ag::Var<T>>& branches) const {
    check(branches.size() >= 2, ErrorKind::shape, "ffd: needs at least 2 branches");
    for (const auto& b : branches)
      check(b->value.shape() == branches[0]->value.shape(), ErrorKind::shape,
            "ffd: branch shape mismatch");
    std::vector<ag::Var<T>> refined, logits;
    refined.reserve(branches.size());
    logits.reserve(branches.size());
    for (const auto& b : branches) {
      refined.push_back(feat_.forward(b));
      logits.push_back(gate_.forward(refined.back()));
    }
    ag::Var<T> weights = ag::softmax_axis1(ag::concat_axis1(logits));
    ag::Var<T> out;
    for (std::size_t b = 0; b < refined.size(); ++b) {
      ag::Var<T> w = ag::slice_axis1(weights, std::int64_t(b), std::int64_t(b) + 1);
      ag::Var<T> term = ag::broadcast_mul_c1(w, refined[b]);
      out = out ? ag::add(out, term) : term;
    }
    return out;
  }

  /// Branch weights only, (N,B,H,W); rows sum to 1 per pixel.
  ag::Var<T> weights(const std::vector<ag::Var<T>>& branches) const {
    std::vector<ag::Var<T>> logits;
    for (const auto& b : branches) logits.push_back(gate_.forward(feat_.forward(b)));
    return ag::softmax_axis1(ag::concat_axis1(logits));
  }

  const nn::Conv2d<T>& feature_conv() const { return feat_; }

  void params(const std::string& p, nn::NamedParams<T>& out) const {
    feat_.params(nn::join_name(p, "feat"), out);
    gate_.params(nn::join_name(p, "gate"), out);
  }
  void state(const std::string& p, nn::NamedTensors<T>& out) const {
    feat_.state(nn::join_name(p, "feat"), out);
    gate_.state(nn::join_name(p, "gate"), out);
  }

 private:
  nn::Conv2d<T> feat_, gate_;
};

// Shape-adaptive block: a zero-initialized convolution predicts bounded
// sampling offsets, a deformable 3x3 convolution and a regular 3x3
// convolution share one kernel and bias, and their outputs are fused.
template <class T>
class Sha {
 public:
  Sha() = default;
  Sha(std::int64_t channels, double bound, Rng& rng)
      : offset_(nn::Conv2d<T>::zeros(channels, 18, 3, 1, 1)),
        kernel_(channels, channels, 3, 1, 1, rng),
        ffd_(channels, rng),
        bound_(bound) {}

  ag::Var<T> offsets(const ag::Var<T>& x) const {
    return ag::mul_scalar(ag::hard_tanh(offset_.forward(x)), T(bound_));
  }

  ag::Var<T> forward(const ag::Var<T>& x) const {
    ag::Var<T> off = offsets(x);
    ag::Var<T> deformed = ag::deform_conv2d(x, off, kernel_.w, kernel_.b, 1, 1);
    ag::Var<T> regular = kernel_.forward(x);
    return ffd_.fuse({deformed, regular});
  }

  double bound() const { return bound_; }
  const Ffd<T>& ffd() const { return ffd_; }
  nn::Conv2d<T>& offset_conv() { return offset_; }
  const nn::Conv2d<T>& kernel() const { return kernel_; }

  void params(const std::string& p, nn::NamedParams<T>& out) const {
    offset_.params(nn::join_name(p, "offset"), out);
    kernel_.params(nn::join_name(p, "kernel"), out);
    ffd_.params(nn::join_name(p, "ffd"), out);
  }
  void state(const std::string& p, nn::NamedTensors<T>& out) const {
    offset_.state(nn::join_name(p, "offset"), out);
    kernel_.state(nn::join_name(p, "kernel"), out);
    ffd_.state(nn::join_name(p, "ffd"), out);
  }

 private:
  nn::Conv2d<T> offset_, kernel_;
  Ffd<T> ffd_;
  double bound_ = 3.0;
};

// Scale-adaptive block: K cascaded conv blocks whose intermediate outputs
// (one per receptive-field scale) are fused.
template <class T>
class ScaleAdaptive {
 public:
  ScaleAdaptive() = default;
  ScaleAdaptive(std::int64_t channels, std::int64_t depth, Rng& rng, bool use_norm = true)
      : ffd_(channels, rng) {
    check(depth >= 2, ErrorKind::config, "scale_adaptive: depth must be >= 2");
    for (std::int64_t i = 0; i < depth; ++i)
      blocks_.emplace_back(channels, channels, rng, use_norm);
  }

  ag::Var<T> forward(const ag::Var<T>& x) const {
    std::vector<ag::Var<T>> scales;
    ag::Var<T> h = x;
    for (const auto& block : blocks_) {
      h = block.forward(h);
      scales.push_back(h);
    }
    return ffd_.fuse(scales);
  }

  /// The cascade outputs F_1..F_K before fusion.
  std::vector<ag::Var<T>> cascade(const ag::Var<T>& x) const {
    std::vector<ag::Var<T>> scales;
    ag::Var<T> h = x;
    for (const auto& block : blocks_) {
      h = block.forward(h);
      scales.push_back(h);
    }
    return scales;
  }

  std::vector<ConvBlock<T>>& blocks() { return blocks_; }
  const Ffd<T>& ffd() const { return ffd_; }

  void params(const std::string& p, nn::NamedParams<T>& out) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].params(nn::join_name(p, "block" + std::to_string(i)), out);
    ffd_.params(nn::join_name(p, "ffd"), out);
  }
  void state(const std::string& p, nn::NamedTensors<T>& out) const {
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      blocks_[i].state(nn::join_name(p, "block" + std::to_string(i)), out);
    ffd_.state(nn::join_name(p, "ffd"), out);
  }

 private:
  std::vector<ConvBlock<T>> blocks_;
  Ffd<T> ffd_;
};

// Cascade pooling fusion bottleneck. Three stride-2 average poolings plus a
// global pooling are upsampled back to the input size; an interleaved
// grouped convolution refines within channels while a shared convolution
// compresses each pooled map, and a final convolution merges both paths.
template <class T>
class Cpf {
 public:
  Cpf() = default;
  Cpf(std::int64_t channels, Rng& rng) : channels_(channels) {
    check(channels % 4 == 0, ErrorKind::config,
          "cpf: channel count must be divisible by 4, got " + std::to_string(channels));
    grouped_ = nn::Conv2d<T>(5 * channels, channels, 3, 1, 1, rng, channels);
    shared_ = nn::Conv2d<T>(channels, channels / 4, 3, 1, 1, rng);
    merge_ = nn::Conv2d<T>(2 * channels, channels, 3, 1, 1, rng);
  }

  /// The five same-sized branches (input, three cascaded pools, global pool).
  std::vector<ag::Var<T>> branches(const ag::Var<T>& x) const {
    const std::int64_t h = x->value.dim(2), w = x->value.dim(3);
    check(h >= 8 && w >= 8, ErrorKind::shape,
          "cpf: spatial size must be at least 8x8, got " + std::to_string(h) + "x" +
              std::to_string(w));
    ag::Var<T> p1 = ag::avg_pool2d(x, 2, 2);
    ag::Var<T> p2 = ag::avg_pool2d(p1, 2, 2);
    ag::Var<T> p3 = ag::avg_pool2d(p2, 2, 2);
    ag::Var<T> g = ag::global_avg_pool(x);
    return {x, ag::resize_bilinear(p1, h, w), ag::resize_bilinear(p2, h, w),
            ag::resize_bilinear(p3, h, w), ag::resize_bilinear(g, h, w)};
  }

  ag::Var<T> forward(const ag::Var<T>& x) const {
    check(x->value.rank() == 4 && x->value.dim(1) == channels_, ErrorKind::shape,
          "cpf: channel mismatch");
    std::vector<ag::Var<T>> b = branches(x);
    ag::Var<T> intra = grouped_.forward(ag::interleave_axis1(b));
    std::vector<ag::Var<T>> compressed;
    for (std::size_t i = 1; i < b.size(); ++i) compressed.push_back(shared_.forward(b[i]));
    ag::Var<T> inter = ag::concat_axis1(compressed);
    return merge_.forward(ag::concat_axis1(intra, inter));
  }

  void params(const std::string& p, nn::NamedParams<T>& out) const {
    grouped_.params(nn::join_name(p, "grouped"), out);
    shared_.params(nn::join_name(p, "shared"), out);
    merge_.params(nn::join_name(p, "merge"), out);
  }
  void state(const std::string& p, nn::NamedTensors<T>& out) const {
    grouped_.state(nn::join_name(p, "grouped"), out);
    shared_.state(nn::join_name(p, "shared"), out);
    merge_.state(nn::join_name(p, "merge"), out);
  }

 private:
  std::int64_t channels_ = 0;
  nn::Conv2d<T> grouped_, shared_, merge_;
};

// One decoder stage: upsample, concatenate the skip, reduce with two conv
// blocks, then optionally the scale-adaptive and shape-adaptive stages.
template <class T>
class SsfStage {
 public:
  SsfStage() = default;
  SsfStage(std::int64_t up_ch, std::int64_t skip_ch, std::int64_t out_ch,
           const AdaptNetConfig& cfg, Rng& rng)
      : reduce1_(up_ch + skip_ch, out_ch, rng), reduce2_(out_ch, out_ch, rng) {
    if (cfg.enable_ssf) scale_.emplace(out_ch, cfg.cascade_depth, rng);
    if (cfg.enable_sha) shape_.emplace(out_ch, cfg.offset_bound, rng);
  }

  ag::Var<T> forward(const ag::Var<T>& decoder_feat, const ag::Var<T>& skip_feat) const {
    const auto& d = decoder_feat->value;
    const auto& s = skip_feat->value;
    check(d.rank() == 4 && s.rank() == 4 && s.dim(0) == d.dim(0) &&
              s.dim(2) == 2 * d.dim(2) && s.dim(3) == 2 * d.dim(3),
          ErrorKind::shape, "ssf: skip spatial size must be exactly 2x the decoder input");
    ag::Var<T> up = ag::resize_bilinear(decoder_feat, s.dim(2), s.dim(3));
    ag::Var<T> h = ag::concat_axis1(up, skip_feat);
    h = reduce1_.forward(h);
    h = reduce2_.forward(h);
    if (scale_) h = scale_->forward(h);
    if (shape_) h = shape_->forward(h);
    return h;
  }

  void params(const std::string& p, nn::NamedParams<T>& out) const {
    reduce1_.params(nn::join_name(p, "reduce1"), out);
    reduce2_.params(nn::join_name(p, "reduce2"), out);
    if (scale_) scale_->params(nn::join_name(p, "scale"), out);
    if (shape_) shape_->params(nn::join_name(p, "shape"), out);
  }
  void state(const std::string& p, nn::NamedTensors<T>& out) const {
    reduce1_.state(nn::join_name(p, "reduce1"), out);
    reduce2_.state(nn::join_name(p, "reduce2"), out);
    if (scale_) scale_->state(nn::join_name(p, "scale"), out);
    if (shape_) shape_->state(nn::join_name(p, "shape"), out);
  }

 private:
  ConvBlock<T> reduce1_, reduce2_;
  std::optional<ScaleAdaptive<T>> scale_;
  std::optional<Sha<T>> shape_;
};

struct SummaryRow {
  std::string name;
  std::string output;  // C x H x W for a reference input
  std::int64_t params = 0;
};

template <class T>
class AdaptNet {
 public:
  AdaptNet(const AdaptNetConfig& cfg, Rng& rng)
      : cfg_(cfg), encoder_(seg_encoder_kind_from_string(cfg.encoder), rng) {
    cfg.validate();
    if (cfg.enable_cpf) cpf_.emplace(encoder_.bottleneck_channels(), rng);
    const auto skips = encoder_.skip_channels();
    std::int64_t up_ch = encoder_.bottleneck_channels();
    for (std::size_t i = 0; i < cfg.decoder_channels.size(); ++i) {
      const std::int64_t skip_ch = skips[skips.size() - 1 - i];
      stages_.emplace_back(up_ch, skip_ch, cfg.decoder_channels[i], cfg, rng);
      up_ch = cfg.decoder_channels[i];
    }
    head_ = nn::Conv2d<T>(up_ch, cfg.num_classes, 1, 1, 0, rng);
  }

  const AdaptNetConfig& config() const { return cfg_; }
  const SegEncoder<T>& encoder() const { return encoder_; }
  ImageStats stats() const { return encoder_.stats(); }

  /// (N,3,H,W) standardized input -> (N,num_classes,H,W) logits.
  ag::Var<T> forward(const ag::Var<T>& x) const {
    EncoderTaps<T> taps = encoder_.forward(x);
    ag::Var<T> h = taps.bottleneck;
    if (cpf_) h = cpf_->forward(h);
    for (std::size_t i = 0; i < stages_.size(); ++i)
      h = stages_[i].forward(h, taps.skips[taps.skips.size() - 1 - i]);
    return head_.forward(h);
  }

  /// Per-pixel class distribution; channels sum to 1 at every pixel.
  ag::Var<T> predict_probs(const ag::Var<T>& x) const {
    return ag::softmax_axis1(forward(x));
  }

  void params(const std::string& prefix, nn::NamedParams<T>& out) const {
    encoder_.params(nn::join_name(prefix, "enc"), out);
    if (cpf_) cpf_->params(nn::join_name(prefix, "cpf"), out);
    for (std::size_t i = 0; i < stages_.size(); ++i)
      stages_[i].params(nn::join_name(prefix, "ssf" + std::to_string(i)), out);
    head_.params(nn::join_name(prefix, "head"), out);
  }
  nn::NamedParams<T> params() const {
    nn::NamedParams<T> out;
    params("", out);
    return out;
  }
  void state(const std::string& prefix, nn::NamedTensors<T>& out) const {
    encoder_.state(nn::join_name(prefix, "enc"), out);
    if (cpf_) cpf_->state(nn::join_name(prefix, "cpf"), out);
    for (std::size_t i = 0; i < stages_.size(); ++i)
      stages_[i].state(nn::join_name(prefix, "ssf" + std::to_string(i)), out);
    head_.state(nn::join_name(prefix, "head"), out);
  }

  std::int64_t param_count() const { return count_params(params()); }

  /// Per-block output shapes (for an HxW input) and parameter counts.
  std::vector<SummaryRow> summary(std::int64_t h, std::int64_t w) const {
    ag::NoGradGuard guard;
    std::vector<SummaryRow> rows;
    auto add_row = [&rows](const std::string& name, const Tensor<T>& t,
                           std::int64_t params) {
      std::string shape;
      for (std::int64_t d = 1; d < t.rank(); ++d) {
        if (!shape.empty()) shape += "x";
        shape += std::to_string(t.dim(d));
      }
      rows.push_back({name, shape, params});
    };
    auto block_params = [](const auto& block) {
      nn::NamedParams<T> p;
      block.params("", p);
      return count_params(p);
    };
    ag::Var<T> x = ag::constant(Tensor<T>({1, 3, h, w}));
    EncoderTaps<T> taps = encoder_.forward(x);
    add_row("encoder", taps.bottleneck->value, block_params(encoder_));
    ag::Var<T> cur = taps.bottleneck;
    if (cpf_) {
      cur = cpf_->forward(cur);
      add_row("cpf", cur->value, block_params(*cpf_));
    }
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      cur = stages_[i].forward(cur, taps.skips[taps.skips.size() - 1 - i]);
      add_row("ssf" + std::to_string(i + 1), cur->value, block_params(stages_[i]));
    }
    cur = head_.forward(cur);
    add_row("head", cur->value, block_params(head_));
    return rows;
  }

 private:
  AdaptNetConfig cfg_;
  SegEncoder<T> encoder_;
  std::optional<Cpf<T>> cpf_;
  std::vector<SsfStage<T>> stages_;
  nn::Conv2d<T> head_;
};

} // namespace lensid::models
