#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lensid/models/adaptnet.hpp"
#include "lensid/models/phase_model.hpp"
#include "lensid/train/adam.hpp"
#include "lensid/train/augment.hpp"
#include "lensid/train/checkpoint.hpp"
#include "lensid/train/config_json.hpp"
#include "lensid/train/loss.hpp"
#include "lensid/train/metrics.hpp"

namespace lensid::train {

struct TrainConfig {
  std::string task = "seg";  // "phase" or "seg"
  std::int64_t epochs = 30;
  double lr0 = 0.001;
  std::int64_t batch_size = 8;
  std::uint64_t seed = 0;
  bool augment = true;
  std::string lr_mode = "schedule";  // "schedule" follows the task schedule, "constant" holds lr0
  double val_fraction = 0.1;

  void validate() const {
    check(task == "phase" || task == "seg", ErrorKind::config, "train: unknown task: " + task);
    check(epochs > 0, ErrorKind::config, "train: epochs must be positive");
    check(lr0 > 0.0, ErrorKind::config, "train: lr0 must be positive");
    check(batch_size > 0, ErrorKind::config, "train: batch_size must be positive");
    check(lr_mode == "schedule" || lr_mode == "constant", ErrorKind::config,
          "train: lr_mode must be schedule or constant");
    check(val_fraction >= 0.0 && val_fraction < 1.0, ErrorKind::config,
          "train: val_fraction must be in [0,1)");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"task", c.task},         {"epochs", c.epochs},
          {"lr0", c.lr0},           {"batch_size", c.batch_size},
          {"seed", c.seed},         {"augment", c.augment},
          {"lr_mode", c.lr_mode},   {"val_fraction", c.val_fraction}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"task", "epochs", "lr0", "batch_size", "seed", "augment",
                               "lr_mode", "val_fraction"},
                              "train");
  TrainConfig c;
  c.task = detail::get_or(j, "task", c.task, "train");
  c.epochs = detail::get_or(j, "epochs", c.epochs, "train");
  c.lr0 = detail::get_or(j, "lr0", c.lr0, "train");
  c.batch_size = detail::get_or(j, "batch_size", c.batch_size, "train");
  c.seed = detail::get_or(j, "seed", c.seed, "train");
  c.augment = detail::get_or(j, "augment", c.augment, "train");
  c.lr_mode = detail::get_or(j, "lr_mode", c.lr_mode, "train");
  c.val_fraction = detail::get_or(j, "val_fraction", c.val_fraction, "train");
  c.validate();
  return c;
}

/// Learning rate for a 1-based epoch. Phase training holds lr0 for ten
/// epochs and then halves it; segmentation decays by 0.8 every other epoch.
inline double lr_schedule(const std::string& task, double lr0, std::int64_t epoch) {
  check(epoch >= 1, ErrorKind::config, "lr_schedule: epochs are numbered from 1");
  check(lr0 > 0.0, ErrorKind::config, "lr_schedule: lr0 must be positive");
  if (task == "phase") return epoch <= 10 ? lr0 : lr0 / 2.0;
  if (task == "seg") return lr0 * std::pow(0.8, double((epoch - 1) / 2));
  throw ConfigError("lr_schedule: unknown task: " + task);
}

struct EpochRecord {
  std::int64_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;

  std::string to_csv() const {
    std::string out = "epoch,lr,train_loss,val_metric\n";
    char buf[128];
    for (const auto& r : records) {
      // %.17g round-trips doubles, so equal histories give equal files
      std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(r.epoch), r.lr, r.train_loss, r.val_metric);
      out += buf;
    }
    return out;
  }

  void save_csv(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    check(bool(os), ErrorKind::io, "cannot write history: " + path.string());
    os << to_csv();
  }
};

struct TrainResult {
  TrainHistory history;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::int64_t best_epoch = 0;
  double best_val_metric = 0.0;
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[std::size_t(rng.uniform_int(i))]);
  return idx;
}

/// Hold out ~val_fraction of the distinct videos for model selection. With
/// fewer than two videos there is nothing to hold out, so validation runs on
/// the training set itself (overfitting experiments rely on this).
template <class Sample, class GetVideo>
void split_train_val(const std::vector<Sample>& all, double val_fraction, std::uint64_t seed,
                     GetVideo&& video_of, std::vector<const Sample*>& train,
                     std::vector<const Sample*>& val) {
  train.clear();
  val.clear();
  std::set<std::string> ids;
  for (const auto& s : all) ids.insert(video_of(s));
  if (ids.size() < 2 || val_fraction <= 0.0) {
    for (const auto& s : all) {
      train.push_back(&s);
      val.push_back(&s);
    }
    return;
  }
  std::vector<std::string> videos(ids.begin(), ids.end());
  Rng rng = Rng(seed).split("val-split");
  const auto order = shuffled_indices(videos.size(), rng);
  const auto n_val = std::clamp<std::size_t>(
      std::size_t(std::llround(val_fraction * double(videos.size()))), 1, videos.size() - 1);
  std::set<std::string> val_ids;
  for (std::size_t i = 0; i < n_val; ++i) val_ids.insert(videos[order[i]]);
  for (const auto& s : all)
    (val_ids.count(video_of(s)) ? val : train).push_back(&s);
}

template <class T>
Tensor<T> seg_batch_images(const std::vector<const data::SegSample*>& samples,
                           const models::ImageStats& stats) {
  const std::int64_t b = std::int64_t(samples.size());
  const std::int64_t h = samples[0]->image.height(), w = samples[0]->image.width();
  Tensor<T> batch({b, 3, h, w});
  const std::int64_t plane = 3 * h * w;
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& v = samples[std::size_t(i)]->image.values();
    check(v.dim(1) == h && v.dim(2) == w, ErrorKind::validation,
          "training images must share one size");
    T* dst = batch.data() + i * plane;
    for (std::int64_t j = 0; j < plane; ++j) dst[j] = T(v[j]);
  }
  return models::standardize(batch, stats);
}

inline Tensor<std::int32_t> seg_batch_labels(const std::vector<const data::SegSample*>& samples) {
  const std::int64_t b = std::int64_t(samples.size());
  const std::int64_t h = samples[0]->mask.height(), w = samples[0]->mask.width();
  Tensor<std::int32_t> target({b, h, w});
  for (std::int64_t i = 0; i < b; ++i) {
    const auto& m = samples[std::size_t(i)]->mask.labels();
    check(m.dim(0) == h && m.dim(1) == w, ErrorKind::validation,
          "training masks must share one size");
    for (std::int64_t j = 0; j < h * w; ++j) target[i * h * w + j] = m[j];
  }
  return target;
}

template <class T>
double mean_val_dice(const models::AdaptNet<T>& model,
                     const std::vector<const data::SegSample*>& val) {
  ag::NoGradGuard guard;
  double acc = 0.0;
  for (const auto* s : val) {
    Tensor<T> x = seg_batch_images<T>({s}, model.stats());
    ag::Var<T> probs = model.predict_probs(ag::constant(x));
    const std::int64_t h = s->mask.height(), w = s->mask.width();
    Tensor<std::uint8_t> pred({h, w});
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t xx = 0; xx < w; ++xx)
        pred(y, xx) = probs->value(0, 1, y, xx) > T(0.5) ? 1 : 0;
    acc += seg_scores(data::MaskImage(std::move(pred)), s->mask).dice;
  }
  return acc / double(val.size());
}

template <class T>
double clip_accuracy(const models::PhaseModel<T>& model,
                     const std::vector<const clips::ClipSample*>& val) {
  std::int64_t hits = 0;
  for (const auto* c : val) {
    const bool truth = c->label == clips::ClipLabel::implantation;
    if (model.classify(c->frames).is_implantation == truth) ++hits;
  }
  return double(hits) / double(val.size());
}

inline void check_loss_finite(double loss, std::int64_t epoch, std::int64_t step) {
  check(std::isfinite(loss), ErrorKind::training,
        "training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
            std::to_string(step) + " (try a smaller lr0)");
}

} // namespace detail

/// Full segmentation training loop: shuffled minibatches, combined loss,
/// per-epoch validation Dice, best and last checkpoints, CSV history.
inline TrainResult train_seg(const TrainConfig& cfg, const models::AdaptNetConfig& model_cfg,
                             const LossConfig& loss_cfg,
                             const std::vector<data::SegSample>& dataset,
                             const std::filesystem::path& out_dir) {
  cfg.validate();
  check(cfg.task == "seg", ErrorKind::config, "train_seg: config task must be seg");
  model_cfg.validate();
  loss_cfg.validate();
  check(!dataset.empty(), ErrorKind::validation, "train_seg: dataset is empty");
  for (const auto& s : dataset) s.validate();
  std::filesystem::create_directories(out_dir);

  Rng root(cfg.seed);
  Rng init_rng = root.split("init");
  models::AdaptNet<float> model(model_cfg, init_rng);
  Adam<float> opt(model.params());

  std::vector<const data::SegSample*> train_set, val_set;
  detail::split_train_val(dataset, cfg.val_fraction, cfg.seed,
                          [](const data::SegSample& s) { return s.video_id; }, train_set, val_set);

  const std::string cfg_json =
      nlohmann::json{{"task", "seg"}, {"model", to_json(model_cfg)}, {"loss", to_json(loss_cfg)}}
          .dump();
  const AugmentConfig aug_cfg;

  TrainResult res;
  res.best_checkpoint = out_dir / "best.ckpt";
  res.last_checkpoint = out_dir / "last.ckpt";
  double best = -1.0;
  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr =
        cfg.lr_mode == "constant" ? cfg.lr0 : lr_schedule("seg", cfg.lr0, epoch);
    Rng erng = root.split("epoch").split(std::uint64_t(epoch));
    const auto order = detail::shuffled_indices(train_set.size(), erng);
    double loss_sum = 0.0;
    std::int64_t steps = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += std::size_t(cfg.batch_size)) {
      std::vector<data::SegSample> batch_store;
      std::vector<const data::SegSample*> batch;
      for (std::size_t i = b0; i < std::min(order.size(), b0 + std::size_t(cfg.batch_size)); ++i)
        if (cfg.augment)
          batch_store.push_back(augment_seg(*train_set[order[i]], aug_cfg, erng));
        else
          batch.push_back(train_set[order[i]]);
      for (const auto& s : batch_store) batch.push_back(&s);

      Tensor<float> x = detail::seg_batch_images<float>(batch, model.stats());
      Tensor<std::int32_t> target = detail::seg_batch_labels(batch);
      opt.zero_grad();
      ag::Var<float> loss = combined_loss(model.forward(ag::constant(x)), target, loss_cfg);
      const double loss_val = double(loss->value[0]);
      detail::check_loss_finite(loss_val, epoch, steps + 1);
      ag::backward(loss);
      opt.step(lr);
      loss_sum += loss_val;
      ++steps;
    }
    const double val_metric = detail::mean_val_dice(model, val_set);
    res.history.records.push_back({epoch, lr, loss_sum / double(steps), val_metric});
    save_checkpoint(res.last_checkpoint, cfg_json, model.params());
    if (val_metric > best) {
      best = val_metric;
      res.best_epoch = epoch;
      res.best_val_metric = val_metric;
      save_checkpoint(res.best_checkpoint, cfg_json, model.params());
    }
  }
  res.history.save_csv(out_dir / "history.csv");
  return res;
}

/// Phase-recognition training loop: every frame of a clip inherits the clip
/// label, the loss is binary cross entropy on per-frame logits, and the
/// validation metric is clip-level accuracy.
inline TrainResult train_phase(const TrainConfig& cfg, const models::PhaseModelConfig& model_cfg,
                               const std::vector<clips::ClipSample>& dataset,
                               const std::filesystem::path& out_dir) {
  cfg.validate();
  check(cfg.task == "phase", ErrorKind::config, "train_phase: config task must be phase");
  model_cfg.validate();
  check(!dataset.empty(), ErrorKind::validation, "train_phase: dataset is empty");
  for (const auto& c : dataset)
    check(std::int64_t(c.frames.size()) == model_cfg.sequence_length, ErrorKind::validation,
          "train_phase: clip length does not match the model's sequence_length");
  std::filesystem::create_directories(out_dir);

  Rng root(cfg.seed);
  Rng init_rng = root.split("init");
  models::PhaseModel<float> model(model_cfg, init_rng);
  Adam<float> opt(model.params());

  std::vector<const clips::ClipSample*> train_set, val_set;
  detail::split_train_val(dataset, cfg.val_fraction, cfg.seed,
                          [](const clips::ClipSample& c) { return c.spec.video_id; }, train_set,
                          val_set);

  const std::string cfg_json =
      nlohmann::json{{"task", "phase"}, {"model", to_json(model_cfg)}}.dump();
  const AugmentConfig aug_cfg;
  const std::int64_t n = model_cfg.sequence_length;

  TrainResult res;
  res.best_checkpoint = out_dir / "best.ckpt";
  res.last_checkpoint = out_dir / "last.ckpt";
  nn::NamedTensors<float> buffers;
  model.buffers("", buffers);
  double best = -1.0;
  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr =
        cfg.lr_mode == "constant" ? cfg.lr0 : lr_schedule("phase", cfg.lr0, epoch);
    Rng erng = root.split("epoch").split(std::uint64_t(epoch));
    const auto order = detail::shuffled_indices(train_set.size(), erng);
    double loss_sum = 0.0;
    std::int64_t steps = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += std::size_t(cfg.batch_size)) {
      std::vector<const clips::ClipSample*> batch;
      std::vector<clips::ClipSample> batch_store;
      for (std::size_t i = b0; i < std::min(order.size(), b0 + std::size_t(cfg.batch_size)); ++i)
        if (cfg.augment)
          batch_store.push_back(augment_clip(*train_set[order[i]], aug_cfg, erng));
        else
          batch.push_back(train_set[order[i]]);
      for (const auto& c : batch_store) batch.push_back(&c);

      const std::int64_t b = std::int64_t(batch.size());
      const std::int64_t h = batch[0]->frames[0].height(), w = batch[0]->frames[0].width();
      Tensor<float> x({b, n, 3, h, w});
      Tensor<float> targets({b, n});
      const std::int64_t clip_sz = n * 3 * h * w;
      for (std::int64_t i = 0; i < b; ++i) {
        Tensor<float> one = models::frames_to_batch<float>(batch[std::size_t(i)]->frames,
                                                           model.stats());
        check(one.numel() == clip_sz, ErrorKind::validation,
              "train_phase: clips must share one frame size");
        std::copy(one.data(), one.data() + clip_sz, x.data() + i * clip_sz);
        const float y =
            batch[std::size_t(i)]->label == clips::ClipLabel::implantation ? 1.0f : 0.0f;
        for (std::int64_t t = 0; t < n; ++t) targets(i, t) = y;
      }

      opt.zero_grad();
      Rng drop_rng = erng.split("dropout").split(std::uint64_t(steps));
      ag::Var<float> logits = model.forward(ag::constant(x), true, &drop_rng);
      ag::Var<float> loss = bce_with_logits(logits, targets);
      const double loss_val = double(loss->value[0]);
      detail::check_loss_finite(loss_val, epoch, steps + 1);
      ag::backward(loss);
      opt.step(lr);
      loss_sum += loss_val;
      ++steps;
    }
    const double val_metric = detail::clip_accuracy(model, val_set);
    res.history.records.push_back({epoch, lr, loss_sum / double(steps), val_metric});
    save_checkpoint(res.last_checkpoint, cfg_json, model.params(), buffers);
    if (val_metric > best) {
      best = val_metric;
      res.best_epoch = epoch;
      res.best_val_metric = val_metric;
      save_checkpoint(res.best_checkpoint, cfg_json, model.params(), buffers);
    }
  }
  res.history.save_csv(out_dir / "history.csv");
  return res;
}

} // namespace lensid::train
