#pragma once

#include <memory>
#include <string>
#include <utility>

#include <json.hpp>

#include "lensid/models/adaptnet.hpp"
#include "lensid/models/phase_model.hpp"
#include "lensid/train/checkpoint.hpp"
#include "lensid/train/config_json.hpp"

namespace lensid::pipeline {

/// Anything that turns a frame into a binary mask. The analyze pipeline only
/// depends on this, so tests can wire in scripted segmenters.
class Segmenter {
public:
  virtual ~Segmenter() = default;
  virtual data::MaskImage segment(const data::ImageTensor& image) = 0;
};

/// Segmentation-model adapter: standardize, softmax, threshold the foreground
/// channel at 0.5. When infer_size is nonzero, frames are resized to it for
/// the forward pass and the mask is resized back to the frame's own grid.
class AdaptNetSegmenter : public Segmenter {
public:
  explicit AdaptNetSegmenter(models::AdaptNet<float> model, std::int64_t infer_size = 0)
      : model_(std::move(model)), infer_size_(infer_size) {
    check(infer_size_ >= 0, ErrorKind::config, "infer_size must be >= 0");
  }

  static AdaptNetSegmenter from_checkpoint(const std::string& path,
                                           std::int64_t infer_size = 0) {
    const train::CheckpointData data = train::read_checkpoint(path);
    nlohmann::json cfg_json;
    try {
      cfg_json = nlohmann::json::parse(data.config_json);
    } catch (const nlohmann::json::exception& e) {
      throw DecodeError("checkpoint config is not JSON: " + std::string(e.what()));
    }
    check(cfg_json.is_object() && cfg_json.value("task", "") == "seg", ErrorKind::model,
          "checkpoint " + path + " is not a segmentation model");
    const models::AdaptNetConfig cfg =
        train::adaptnet_config_from_json(cfg_json.at("model"));
    Rng rng(0);
    models::AdaptNet<float> model(cfg, rng);
    train::load_weights(data, model.params());
    return AdaptNetSegmenter(std::move(model), infer_size);
  }

  const models::AdaptNet<float>& model() const { return model_; }

  data::MaskImage segment(const data::ImageTensor& image) override {
    ag::NoGradGuard guard;
    const std::int64_t native = image.height();
    const data::ImageTensor framed =
        (infer_size_ > 0 && infer_size_ != native) ? image.resized(infer_size_) : image;
    const std::int64_t side = framed.height();
    Tensor<float> x({1, 3, side, side});
    const Tensor<float>& v = framed.values();
    for (std::int64_t i = 0; i < v.numel(); ++i) x[i] = v[i];
    x = models::standardize(x, model_.stats());
    const ag::Var<float> probs = model_.predict_probs(ag::constant(x));
    Tensor<std::uint8_t> mask({side, side});
    for (std::int64_t y = 0; y < side; ++y)
      for (std::int64_t xx = 0; xx < side; ++xx)
        mask(y, xx) = probs->value(0, 1, y, xx) > 0.5f ? 1 : 0;
    data::MaskImage out(std::move(mask));
    if (side != native) out = out.resized(native);
    return out;
  }

private:
  models::AdaptNet<float> model_;
  std::int64_t infer_size_;
};

/// Rebuild a phase model from a training checkpoint (weights + BN buffers).
inline models::PhaseModel<float> phase_model_from_checkpoint(const std::string& path) {
  const train::CheckpointData data = train::read_checkpoint(path);
  nlohmann::json cfg_json;
  try {
    cfg_json = nlohmann::json::parse(data.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError("checkpoint config is not JSON: " + std::string(e.what()));
  }
  check(cfg_json.is_object() && cfg_json.value("task", "") == "phase", ErrorKind::model,
        "checkpoint " + path + " is not a phase model");
  const models::PhaseModelConfig cfg = train::phase_config_from_json(cfg_json.at("model"));
  Rng rng(0);
  models::PhaseModel<float> model(cfg, rng);
  nn::NamedTensors<float> buffers;
  model.buffers("", buffers);
  train::load_weights(data, model.params(), buffers);
  return model;
}

} // namespace lensid::pipeline
