#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lensid/clips/clip_generator.hpp"
#include "lensid/data/video.hpp"
#include "lensid/models/backbones.hpp"
#include "lensid/nn/layers.hpp"
#include "lensid/nn/rnn.hpp"

namespace lensid::models {

struct PhaseModelConfig {
  std::string backbone = "VGG19";
  std::string rnn_type = "GRU";
  std::int64_t rnn_units = 5;
  std::int64_t dense_dim = 64;
  double dropout_rate = 0.5;
  std::int64_t sequence_length = 5;

  void validate() const {
    phase_backbone_from_string(backbone);
    nn::rnn_kind_from_string(rnn_type);
    check(rnn_units >= 1, ErrorKind::config, "config: rnn_units must be >= 1");
    check(dense_dim >= 1, ErrorKind::config, "config: dense_dim must be >= 1");
    check(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::config,
          "config: dropout_rate must be in [0,1)");
    check(sequence_length >= 2, ErrorKind::config, "config: sequence_length must be >= 2");
  }
};

struct PhasePrediction {
  std::vector<double> per_frame_probs;
  double clip_prob = 0.0;
  bool is_implantation = false;
};

/// Stack a clip's frames into a standardized (N,3,H,W) batch.
template <class T>
Tensor<T> frames_to_batch(const std::vector<data::ImageTensor>& frames,
                          const ImageStats& stats) {
  check(!frames.empty(), ErrorKind::shape, "frames_to_batch: empty clip");
  const std::int64_t h = frames[0].height(), w = frames[0].width();
  Tensor<T> batch({std::int64_t(frames.size()), 3, h, w});
  const std::int64_t plane = 3 * h * w;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& v = frames[i].values();
    check(v.dim(1) == h && v.dim(2) == w, ErrorKind::shape,
          "frames_to_batch: frame sizes differ within the clip");
    T* dst = batch.data() + std::int64_t(i) * plane;
    for (std::int64_t j = 0; j < plane; ++j) dst[j] = T(v[j]);
  }
  return standardize(batch, stats);
}

// Per-frame backbone + pooling, a dense stack, a recurrent layer across the
// clip, and a per-frame sigmoid head.
template <class T>
class PhaseModel {
 public:
  PhaseModel(const PhaseModelConfig& cfg, Rng& rng)
      : cfg_(cfg), backbone_(phase_backbone_from_string(cfg.backbone), rng) {
    cfg.validate();
    pre_ = nn::Dense<T>(backbone_.feature_dim(), cfg.dense_dim, rng);
    rnn_ = nn::Rnn<T>(nn::rnn_kind_from_string(cfg.rnn_type), cfg.dense_dim, cfg.rnn_units,
                      rng);
    post_ = nn::Dense<T>(rnn_.out_features(), cfg.dense_dim, rng);
    head_ = nn::Dense<T>(cfg.dense_dim, 1, rng);
  }

  const PhaseModelConfig& config() const { return cfg_; }
  const PhaseBackbone<T>& backbone() const { return backbone_; }
  nn::Dense<T>& head() { return head_; }
  ImageStats stats() const { return backbone_.stats(); }

  /// (B,N,3,H,W) standardized input -> (B,N) pre-sigmoid logits.
  ag::Var<T> forward(const ag::Var<T>& x, bool training = false,
                     Rng* dropout_rng = nullptr) const {
    const auto& v = x->value;
    check(v.rank() == 5 && v.dim(2) == 3, ErrorKind::shape,
          "phase model: input must be (B,N,3,H,W)");
    check(v.dim(1) == cfg_.sequence_length, ErrorKind::shape,
          "phase model: clip length " + std::to_string(v.dim(1)) +
              " != sequence_length " + std::to_string(cfg_.sequence_length));
    check(!training || cfg_.dropout_rate == 0.0 || dropout_rng != nullptr,
          ErrorKind::config, "phase model: training forward needs a dropout rng");
    const std::int64_t b = v.dim(0), n = v.dim(1), h = v.dim(3), w = v.dim(4);

    ag::Var<T> flat = ag::reshape(x, {b * n, 3, h, w});
    ag::Var<T> feat = backbone_.forward(flat, training);
    feat = pre_.forward(feat);
    if (training && cfg_.dropout_rate > 0.0)
      feat = ag::dropout(feat, cfg_.dropout_rate, *dropout_rng);
    feat = ag::relu(feat);

    ag::Var<T> seq = rnn_.forward(ag::reshape(feat, {b, n, cfg_.dense_dim}));

    ag::Var<T> tail = ag::reshape(seq, {b * n, rnn_.out_features()});
    tail = post_.forward(tail);
    if (training && cfg_.dropout_rate > 0.0)
      tail = ag::dropout(tail, cfg_.dropout_rate, *dropout_rng);
    tail = ag::relu(tail);
    return ag::reshape(head_.forward(tail), {b, n});
  }

  ag::Var<T> forward_probs(const ag::Var<T>& x, bool training = false,
                           Rng* dropout_rng = nullptr) const {
    return ag::sigmoid(forward(x, training, dropout_rng));
  }

  /// Inference on one clip's frames ([0,1] RGB, standardized internally).
  PhasePrediction classify(const std::vector<data::ImageTensor>& frames) const {
    check(std::int64_t(frames.size()) == cfg_.sequence_length, ErrorKind::shape,
          "classify: clip has " + std::to_string(frames.size()) + " frames, model expects " +
              std::to_string(cfg_.sequence_length));
    ag::NoGradGuard guard;
    Tensor<T> batch = frames_to_batch<T>(frames, stats());
    ag::Var<T> x = ag::constant(batch.reshaped(
        {1, cfg_.sequence_length, 3, frames[0].height(), frames[0].width()}));
    ag::Var<T> probs = forward_probs(x);
    PhasePrediction out;
    double acc = 0.0;
    for (std::int64_t t = 0; t < cfg_.sequence_length; ++t) {
      const double p = double(probs->value(0, t));
      out.per_frame_probs.push_back(p);
      acc += p;
    }
    out.clip_prob = acc / double(cfg_.sequence_length);
    out.is_implantation = out.clip_prob >= 0.5;
    return out;
  }

  void params(const std::string& prefix, nn::NamedParams<T>& out) const {
    backbone_.params(nn::join_name(prefix, "backbone"), out);
    pre_.params(nn::join_name(prefix, "pre"), out);
    rnn_.params(nn::join_name(prefix, "rnn"), out);
    post_.params(nn::join_name(prefix, "post"), out);
    head_.params(nn::join_name(prefix, "head"), out);
  }
  nn::NamedParams<T> params() const {
    nn::NamedParams<T> out;
    params("", out);
    return out;
  }
  void buffers(const std::string& prefix, nn::NamedTensors<T>& out) const {
    backbone_.buffers(nn::join_name(prefix, "backbone"), out);
  }
  std::int64_t param_count() const { return count_params(params()); }

 private:
  PhaseModelConfig cfg_;
  PhaseBackbone<T> backbone_;
  nn::Dense<T> pre_, post_, head_;
  nn::Rnn<T> rnn_;
};

template <class T>
PhasePrediction classify_clip(const PhaseModel<T>& model, const clips::ClipSample& clip) {
  return model.classify(clip.frames);
}

struct LocalizationResult {
  bool found = false;  // false when no window crosses the decision threshold
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<double> window_starts;
  std::vector<double> window_probs;
};

/// Slide a 3 s window along the video, score each window with clip_prob, and
/// merge the longest run of positive windows into one interval.
template <class Fn>
LocalizationResult localize_implantation_with(Fn&& clip_prob, const data::VideoFrames& video,
                                              double stride_s, std::int64_t n_frames) {
  check(stride_s > 0.0, ErrorKind::config, "localize: stride must be positive");
  check(n_frames >= 2, ErrorKind::config, "localize: need at least 2 frames per window");
  const double duration = video.duration_s();
  check(duration > clips::kClipSeconds, ErrorKind::validation,
        "localize: video must be longer than 3 s");
  LocalizationResult res;
  for (double t = 0.0; t + clips::kClipSeconds <= duration + 1e-9; t += stride_s) {
    std::vector<data::ImageTensor> frames;
    frames.reserve(std::size_t(n_frames));
    for (std::int64_t k = 0; k < n_frames; ++k) {
      const double time = t + clips::kClipSeconds * (double(k) + 0.5) / double(n_frames);
      std::int64_t idx = std::int64_t(time * video.fps());
      idx = std::min(idx, video.frame_count() - 1);
      frames.push_back(video.frame(idx));
    }
    res.window_starts.push_back(t);
    res.window_probs.push_back(clip_prob(frames));
  }
  std::size_t best_len = 0, best_start = 0, run_len = 0;
  for (std::size_t i = 0; i < res.window_probs.size(); ++i) {
    if (res.window_probs[i] >= 0.5) {
      ++run_len;
      if (run_len > best_len) {
        best_len = run_len;
        best_start = i + 1 - run_len;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len > 0) {
    res.found = true;
    res.start_s = res.window_starts[best_start];
    res.end_s = res.window_starts[best_start + best_len - 1] + clips::kClipSeconds;
  }
  return res;
}

template <class T>
LocalizationResult localize_implantation(const PhaseModel<T>& model,
                                         const data::VideoFrames& video, double stride_s) {
  return localize_implantation_with(
      [&model](const std::vector<data::ImageTensor>& frames) {
        return model.classify(frames).clip_prob;
      },
      video, stride_s, model.config().sequence_length);
}

} // namespace lensid::models
