#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "lensid/train/harness.hpp"
#include "lensid/train/metrics.hpp"

namespace {

using lensid::ConfigError;
using lensid::DecodeError;
using lensid::ModelError;
using lensid::Rng;
using lensid::Tensor;
using lensid::TrainingError;
using lensid::data::ImageTensor;
using lensid::data::MaskImage;
using lensid::data::SegSample;
namespace ag = lensid::ag;
namespace fs = std::filesystem;
namespace models = lensid::models;
namespace train = lensid::train;

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::path(::testing::TempDir()) / ("lensid_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(LrSchedule, PhaseHalvesAfterTenEpochs) {
  for (int e = 1; e <= 10; ++e) EXPECT_DOUBLE_EQ(train::lr_schedule("phase", 0.0002, e), 0.0002);
  for (int e = 11; e <= 20; ++e) EXPECT_DOUBLE_EQ(train::lr_schedule("phase", 0.0002, e), 0.0001);
}

TEST(LrSchedule, SegDecaysEveryOtherEpoch) {
  EXPECT_DOUBLE_EQ(train::lr_schedule("seg", 0.002, 1), 0.002);
  EXPECT_DOUBLE_EQ(train::lr_schedule("seg", 0.002, 2), 0.002);
  EXPECT_DOUBLE_EQ(train::lr_schedule("seg", 0.002, 3), 0.002 * 0.8);
  EXPECT_DOUBLE_EQ(train::lr_schedule("seg", 0.001, 5), 0.001 * 0.8 * 0.8);
  EXPECT_NEAR(train::lr_schedule("seg", 0.001, 5), 0.00064, 1e-18);
  EXPECT_DOUBLE_EQ(train::lr_schedule("seg", 0.001, 30), 0.001 * std::pow(0.8, 14.0));
}

TEST(LrSchedule, RejectsBadArguments) {
  EXPECT_THROW(train::lr_schedule("seg", 0.001, 0), ConfigError);
  EXPECT_THROW(train::lr_schedule("seg", 0.0, 1), ConfigError);
  EXPECT_THROW(train::lr_schedule("detection", 0.001, 1), ConfigError);
}

ImageTensor gray_image(std::int64_t side, float level) {
  return ImageTensor(Tensor<float>::full({3, side, side}, level));
}

MaskImage disk_mask(std::int64_t side, double cx, double cy, double r) {
  Tensor<std::uint8_t> m({side, side});
  for (std::int64_t y = 0; y < side; ++y)
    for (std::int64_t x = 0; x < side; ++x)
      if ((double(x) - cx) * (double(x) - cx) + (double(y) - cy) * (double(y) - cy) <= r * r)
        m(y, x) = 1;
  return MaskImage(std::move(m));
}

void centroid(const MaskImage& m, double& cx, double& cy) {
  double sx = 0, sy = 0, n = 0;
  for (std::int64_t y = 0; y < m.height(); ++y)
    for (std::int64_t x = 0; x < m.width(); ++x)
      if (m.labels()(y, x)) {
        sx += double(x);
        sy += double(y);
        n += 1.0;
      }
  cx = sx / n;
  cy = sy / n;
}

TEST(Augment, ZeroProbabilityIsIdentity) {
  Rng rng(3);
  SegSample s;
  s.image = ImageTensor(Tensor<float>::rand_uniform({3, 32, 32}, rng));
  s.mask = disk_mask(32, 16, 16, 7);
  s.video_id = "v";
  train::AugmentConfig cfg;
  cfg.transform_prob = 0.0;
  SegSample out = train::augment_seg(s, cfg, rng);
  EXPECT_EQ(out.image.values().vec(), s.image.values().vec());
  EXPECT_EQ(out.mask.labels().vec(), s.mask.labels().vec());
}

TEST(Augment, QuarterTurnPreservesForegroundCountExactly) {
  Rng rng(5);
  Tensor<std::uint8_t> m({34, 34});
  for (std::int64_t i = 0; i < m.numel(); ++i) m[i] = std::uint8_t(rng.uniform_int(2));
  MaskImage mask(m);
  train::GeomTransform g;
  g.rotate_deg = 90.0;
  MaskImage turned = train::warp_mask(mask, g);
  EXPECT_EQ(turned.foreground_count(), mask.foreground_count());
  EXPECT_NE(turned.labels().vec(), mask.labels().vec()); // actually moved
}

TEST(Augment, ShiftMovesDiskCentroid) {
  MaskImage mask = disk_mask(48, 24, 24, 6);
  train::GeomTransform g;
  g.shift_x = 5.0;
  MaskImage moved = train::warp_mask(mask, g);
  double cx0, cy0, cx1, cy1;
  centroid(mask, cx0, cy0);
  centroid(moved, cx1, cy1);
  EXPECT_NEAR(cx1 - cx0, 5.0, 0.5);
  EXPECT_NEAR(cy1 - cy0, 0.0, 0.5);
}

TEST(Augment, WarpKeepsMaskBinaryUnderRotationAndScale) {
  MaskImage mask = disk_mask(40, 20, 20, 9);
  train::GeomTransform g{2.5, -1.5, 1.07, 13.0};
  MaskImage warped = train::warp_mask(mask, g);
  for (std::int64_t i = 0; i < warped.labels().numel(); ++i)
    EXPECT_LE(warped.labels()[i], 1);
  EXPECT_GT(warped.foreground_count(), 0);
}

TEST(Augment, PhotometricTransformsNeverTouchTheMask) {
  Rng rng(7);
  SegSample s;
  s.image = ImageTensor(Tensor<float>::rand_uniform({3, 32, 32}, rng));
  s.mask = disk_mask(32, 16, 16, 7);
  s.video_id = "v";
  train::AugmentConfig cfg;
  cfg.transform_prob = 1.0; // every transform fires ...
  cfg.max_shift_frac = 0.0; // ... but the geometric ones are pinned to identity
  cfg.scale_lo = cfg.scale_hi = 1.0;
  cfg.max_rotate_deg = 0.0;
  SegSample out = train::augment_seg(s, cfg, rng);
  EXPECT_EQ(out.mask.labels().vec(), s.mask.labels().vec());
  EXPECT_NE(out.image.values().vec(), s.image.values().vec());
}

TEST(Augment, DeterministicUnderSeed) {
  Rng data_rng(11);
  SegSample s;
  s.image = ImageTensor(Tensor<float>::rand_uniform({3, 32, 32}, data_rng));
  s.mask = disk_mask(32, 14, 17, 8);
  s.video_id = "v";
  train::AugmentConfig cfg;
  Rng a(42), b(42);
  SegSample oa = train::augment_seg(s, cfg, a);
  SegSample ob = train::augment_seg(s, cfg, b);
  EXPECT_EQ(oa.image.values().vec(), ob.image.values().vec());
  EXPECT_EQ(oa.mask.labels().vec(), ob.mask.labels().vec());
}

TEST(Augment, BlursPreserveConstantImages) {
  ImageTensor img = gray_image(24, 0.42f);
  ImageTensor gauss = train::gaussian_blur(img, 1.3);
  ImageTensor motion = train::motion_blur(img, 5, 30.0);
  for (std::int64_t i = 0; i < img.values().numel(); ++i) {
    EXPECT_NEAR(gauss.values()[i], 0.42f, 1e-6f);
    EXPECT_NEAR(motion.values()[i], 0.42f, 1e-6f);
  }
}

TEST(Augment, BrightnessAndContrastStayInRange) {
  ImageTensor img = gray_image(8, 0.9f);
  ImageTensor bright = train::adjust_brightness(img, 0.3);
  for (std::int64_t i = 0; i < bright.values().numel(); ++i)
    EXPECT_FLOAT_EQ(bright.values()[i], 1.0f);
  Rng rng(13);
  ImageTensor noisy(Tensor<float>::rand_uniform({3, 8, 8}, rng));
  ImageTensor contrasty = train::adjust_contrast(noisy, 1.3);
  for (std::int64_t i = 0; i < contrasty.values().numel(); ++i) {
    EXPECT_GE(contrasty.values()[i], 0.0f);
    EXPECT_LE(contrasty.values()[i], 1.0f);
  }
}

TEST(Augment, ClipFramesShareOneTransform) {
  Rng rng(17);
  lensid::clips::ClipSample clip;
  clip.spec.video_id = "v";
  ImageTensor frame(Tensor<float>::rand_uniform({3, 16, 16}, rng));
  clip.frames = {frame, frame, frame};
  train::AugmentConfig cfg;
  cfg.transform_prob = 1.0;
  lensid::clips::ClipSample out = train::augment_clip(clip, cfg, rng);
  ASSERT_EQ(out.frames.size(), 3u);
  EXPECT_EQ(out.frames[0].values().vec(), out.frames[1].values().vec());
  EXPECT_EQ(out.frames[1].values().vec(), out.frames[2].values().vec());
  EXPECT_NE(out.frames[0].values().vec(), frame.values().vec());
}

TEST(Adam, ConvergesOnAQuadratic) {
  auto x = ag::parameter(Tensor<double>({1}, {-4.0}));
  train::Adam<double> opt({{"x", x}});
  for (int i = 0; i < 600; ++i) {
    opt.zero_grad();
    auto diff = ag::add_scalar(x, -3.0);
    auto loss = ag::sum_all(ag::mul(diff, diff));
    ag::backward(loss);
    opt.step(0.05);
  }
  EXPECT_NEAR(x->value[0], 3.0, 1e-2);
  EXPECT_EQ(opt.steps_taken(), 600);
}

TEST(Adam, SkipsParametersWithoutGradients) {
  auto x = ag::parameter(Tensor<double>({1}, {1.0}));
  auto y = ag::parameter(Tensor<double>({1}, {5.0}));
  train::Adam<double> opt({{"x", x}, {"y", y}});
  opt.zero_grad();
  auto loss = ag::sum_all(ag::mul(x, x));
  ag::backward(loss);
  opt.step(0.1);
  EXPECT_NE(x->value[0], 1.0);
  EXPECT_DOUBLE_EQ(y->value[0], 5.0);
}

models::AdaptNetConfig tiny_seg_cfg() {
  models::AdaptNetConfig cfg;
  cfg.encoder = "TinyDesk";
  cfg.decoder_channels = {16, 12, 8, 8};
  cfg.enable_ssf = cfg.enable_sha = cfg.enable_cpf = false;
  return cfg;
}

TEST(Checkpoint, RoundTripReproducesOutputsBitExactly) {
  fs::path dir = fresh_dir("ckpt_roundtrip");
  Rng rng(19);
  models::AdaptNet<float> model(tiny_seg_cfg(), rng);
  const std::string cfg_json = train::to_json(tiny_seg_cfg()).dump();
  train::save_checkpoint(dir / "m.ckpt", cfg_json, model.params());

  train::CheckpointData data = train::read_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(data.config_json, cfg_json);

  Rng other(999);
  models::AdaptNet<float> restored(tiny_seg_cfg(), other);
  train::load_weights(data, restored.params());

  ag::NoGradGuard guard;
  Tensor<float> x = Tensor<float>::randn({1, 3, 32, 32}, rng);
  auto a = model.forward(ag::constant(x));
  auto b = restored.forward(ag::constant(x));
  EXPECT_EQ(a->value.vec(), b->value.vec());
}

TEST(Checkpoint, DetectsMissingAndMisshapenBlobs) {
  fs::path dir = fresh_dir("ckpt_bad");
  Rng rng(23);
  models::AdaptNet<float> model(tiny_seg_cfg(), rng);
  train::save_checkpoint(dir / "m.ckpt", "{}", model.params());
  train::CheckpointData data = train::read_checkpoint(dir / "m.ckpt");

  train::CheckpointData missing = data;
  missing.blobs.erase(missing.blobs.begin());
  EXPECT_THROW(train::load_weights(missing, model.params()), ModelError);

  train::CheckpointData misshapen = data;
  misshapen.blobs.begin()->second = Tensor<float>({1});
  EXPECT_THROW(train::load_weights(misshapen, model.params()), ModelError);
}

TEST(Checkpoint, RejectsForeignFiles) {
  fs::path dir = fresh_dir("ckpt_foreign");
  std::ofstream(dir / "junk.bin", std::ios::binary) << "definitely not a checkpoint";
  EXPECT_THROW(train::read_checkpoint(dir / "junk.bin"), DecodeError);
  EXPECT_THROW(train::read_checkpoint(dir / "absent.bin"), lensid::IoError);
}

TEST(ConfigJson, TrainConfigRoundTripAndStrictKeys) {
  train::TrainConfig cfg;
  cfg.task = "phase";
  cfg.epochs = 7;
  cfg.lr0 = 0.0005;
  cfg.batch_size = 4;
  cfg.seed = 123;
  cfg.augment = false;
  cfg.lr_mode = "constant";
  cfg.val_fraction = 0.2;
  train::TrainConfig back = train::train_config_from_json(train::to_json(cfg));
  EXPECT_EQ(back.task, cfg.task);
  EXPECT_EQ(back.epochs, cfg.epochs);
  EXPECT_DOUBLE_EQ(back.lr0, cfg.lr0);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.augment, cfg.augment);
  EXPECT_EQ(back.lr_mode, cfg.lr_mode);

  EXPECT_THROW(train::train_config_from_json({{"task", "seg"}, {"leerning_rate", 0.1}}),
               ConfigError);
  EXPECT_THROW(train::train_config_from_json({{"epochs", "three"}}), ConfigError);
  EXPECT_THROW(train::train_config_from_json({{"task", "detection"}}), ConfigError);
}

TEST(ConfigJson, ModelConfigsRoundTrip) {
  models::AdaptNetConfig seg = tiny_seg_cfg();
  models::AdaptNetConfig seg_back = train::adaptnet_config_from_json(train::to_json(seg));
  EXPECT_EQ(seg_back.encoder, seg.encoder);
  EXPECT_EQ(seg_back.decoder_channels, seg.decoder_channels);
  EXPECT_EQ(seg_back.enable_ssf, seg.enable_ssf);
  EXPECT_THROW(train::adaptnet_config_from_json({{"encdor", "VGG16"}}), ConfigError);

  models::PhaseModelConfig ph;
  ph.backbone = "TinyDesk";
  ph.sequence_length = 3;
  models::PhaseModelConfig ph_back = train::phase_config_from_json(train::to_json(ph));
  EXPECT_EQ(ph_back.backbone, ph.backbone);
  EXPECT_EQ(ph_back.sequence_length, ph.sequence_length);
  EXPECT_THROW(train::phase_config_from_json({{"rnn_units", 0}}), ConfigError);

  train::LossConfig loss;
  loss.lambda = 0.6;
  train::LossConfig loss_back = train::loss_config_from_json(train::to_json(loss));
  EXPECT_DOUBLE_EQ(loss_back.lambda, 0.6);
  EXPECT_THROW(train::loss_config_from_json({{"lamda", 0.5}}), ConfigError);
}

TEST(ValSplit, HoldsOutVideosDisjointly) {
  std::vector<SegSample> data;
  for (int v = 0; v < 10; ++v)
    for (int i = 0; i < 3; ++i) {
      SegSample s;
      s.image = gray_image(16, 0.5f);
      s.mask = disk_mask(16, 8, 8, 3);
      s.video_id = "video" + std::to_string(v);
      data.push_back(s);
    }
  std::vector<const SegSample*> tr, va;
  train::detail::split_train_val(data, 0.1, 7,
                                 [](const SegSample& s) { return s.video_id; }, tr, va);
  EXPECT_EQ(tr.size() + va.size(), data.size());
  EXPECT_EQ(va.size(), 3u); // one held-out video
  std::set<std::string> tr_videos, va_videos;
  for (auto* s : tr) tr_videos.insert(s->video_id);
  for (auto* s : va) va_videos.insert(s->video_id);
  for (const auto& v : va_videos) EXPECT_EQ(tr_videos.count(v), 0u);
}

TEST(ValSplit, SingleVideoValidatesOnTrain) {
  std::vector<SegSample> data(2);
  for (auto& s : data) {
    s.image = gray_image(16, 0.5f);
    s.mask = disk_mask(16, 8, 8, 3);
    s.video_id = "only";
  }
  std::vector<const SegSample*> tr, va;
  train::detail::split_train_val(data, 0.1, 7,
                                 [](const SegSample& s) { return s.video_id; }, tr, va);
  EXPECT_EQ(tr.size(), 2u);
  EXPECT_EQ(va.size(), 2u);
}

SegSample overfit_sample(std::int64_t side) {
  SegSample s;
  Rng rng(31);
  Tensor<float> img({3, side, side});
  MaskImage mask = disk_mask(side, double(side) / 2, double(side) / 2, double(side) / 4);
  for (std::int64_t y = 0; y < side; ++y)
    for (std::int64_t x = 0; x < side; ++x) {
      const float fg = mask.labels()(y, x) ? 0.8f : 0.2f;
      for (std::int64_t c = 0; c < 3; ++c)
        img(c, y, x) = fg + 0.05f * float(rng.normal());
    }
  s.image = ImageTensor(img);
  s.mask = mask;
  s.video_id = "single";
  return s;
}

TEST(TrainSeg, OverfitsOneSample) {
  fs::path dir = fresh_dir("seg_overfit");
  train::TrainConfig cfg;
  cfg.task = "seg";
  cfg.epochs = 200;
  cfg.lr0 = 0.01;
  cfg.batch_size = 1;
  cfg.seed = 5;
  cfg.augment = false;
  cfg.lr_mode = "constant";
  train::TrainResult res =
      train::train_seg(cfg, tiny_seg_cfg(), train::LossConfig{}, {overfit_sample(64)}, dir);
  ASSERT_EQ(res.history.records.size(), 200u);
  EXPECT_GT(res.history.records.back().val_metric, 0.95);
  EXPECT_GT(res.best_val_metric, 0.95);
  EXPECT_TRUE(fs::exists(res.best_checkpoint));
  EXPECT_TRUE(fs::exists(res.last_checkpoint));
  EXPECT_TRUE(fs::exists(dir / "history.csv"));
  for (const auto& r : res.history.records) EXPECT_DOUBLE_EQ(r.lr, 0.01);
  // the loss should have dropped by an order of magnitude at least
  EXPECT_LT(res.history.records.back().train_loss,
            res.history.records.front().train_loss / 10.0);
}

std::vector<SegSample> two_video_dataset() {
  std::vector<SegSample> data;
  Rng rng(37);
  for (int v = 0; v < 2; ++v)
    for (int i = 0; i < 2; ++i) {
      SegSample s;
      s.image = ImageTensor(Tensor<float>::rand_uniform({3, 32, 32}, rng));
      s.mask = disk_mask(32, 10 + 6 * v, 10 + 4 * i, 6);
      s.video_id = "v" + std::to_string(v);
      data.push_back(s);
    }
  return data;
}

TEST(TrainSeg, HistoryLrColumnFollowsSchedule) {
  fs::path dir = fresh_dir("seg_lr");
  train::TrainConfig cfg;
  cfg.task = "seg";
  cfg.epochs = 5;
  cfg.lr0 = 0.002;
  cfg.batch_size = 2;
  cfg.seed = 1;
  cfg.augment = false;
  train::TrainResult res =
      train::train_seg(cfg, tiny_seg_cfg(), train::LossConfig{}, two_video_dataset(), dir);
  ASSERT_EQ(res.history.records.size(), 5u);
  for (std::int64_t e = 1; e <= 5; ++e)
    EXPECT_DOUBLE_EQ(res.history.records[std::size_t(e - 1)].lr,
                     train::lr_schedule("seg", 0.002, e));
}

TEST(TrainSeg, SameSeedGivesBitIdenticalHistory) {
  train::TrainConfig cfg;
  cfg.task = "seg";
  cfg.epochs = 3;
  cfg.lr0 = 0.005;
  cfg.batch_size = 2;
  cfg.seed = 77;
  cfg.augment = true;
  fs::path da = fresh_dir("seg_det_a"), db = fresh_dir("seg_det_b");
  auto a = train::train_seg(cfg, tiny_seg_cfg(), train::LossConfig{}, two_video_dataset(), da);
  auto b = train::train_seg(cfg, tiny_seg_cfg(), train::LossConfig{}, two_video_dataset(), db);
  EXPECT_EQ(a.history.to_csv(), b.history.to_csv());
}

TEST(TrainSeg, DivergenceAbortsWithDiagnostic) {
  fs::path dir = fresh_dir("seg_diverge");
  train::TrainConfig cfg;
  cfg.task = "seg";
  cfg.epochs = 10;
  cfg.lr0 = 1e8;
  cfg.batch_size = 1;
  cfg.seed = 2;
  cfg.augment = false;
  cfg.lr_mode = "constant";
  EXPECT_THROW(
      train::train_seg(cfg, tiny_seg_cfg(), train::LossConfig{}, {overfit_sample(32)}, dir),
      TrainingError);
}

TEST(TrainSeg, RejectsMismatchedConfig) {
  fs::path dir = fresh_dir("seg_badcfg");
  train::TrainConfig cfg;
  cfg.task = "phase";
  EXPECT_THROW(
      train::train_seg(cfg, tiny_seg_cfg(), train::LossConfig{}, {overfit_sample(32)}, dir),
      ConfigError);
  cfg.task = "seg";
  EXPECT_THROW(train::train_seg(cfg, tiny_seg_cfg(), train::LossConfig{}, {}, dir),
               lensid::ValidationError);
}

lensid::clips::ClipSample labelled_clip(const std::string& video, bool implant, Rng& rng) {
  lensid::clips::ClipSample c;
  c.spec.video_id = video;
  c.label = implant ? lensid::clips::ClipLabel::implantation : lensid::clips::ClipLabel::rest;
  const float base = implant ? 0.8f : 0.2f;
  for (int t = 0; t < 3; ++t) {
    Tensor<float> f({3, 8, 8});
    for (std::int64_t i = 0; i < f.numel(); ++i)
      f[i] = std::clamp(base + 0.05f * float(rng.normal()), 0.0f, 1.0f);
    c.frames.emplace_back(std::move(f));
  }
  return c;
}

TEST(TrainPhase, LearnsASeparableToyProblem) {
  fs::path dir = fresh_dir("phase_fit");
  Rng rng(41);
  std::vector<lensid::clips::ClipSample> clips;
  for (int v = 0; v < 2; ++v)
    for (int i = 0; i < 10; ++i)
      clips.push_back(labelled_clip("v" + std::to_string(v), i % 2 == 0, rng));

  models::PhaseModelConfig mc;
  mc.backbone = "TinyDesk";
  mc.rnn_type = "GRU";
  mc.rnn_units = 4;
  mc.dense_dim = 8;
  mc.dropout_rate = 0.0;
  mc.sequence_length = 3;

  train::TrainConfig cfg;
  cfg.task = "phase";
  cfg.epochs = 40;
  cfg.lr0 = 0.01;
  cfg.batch_size = 4;
  cfg.seed = 9;
  cfg.augment = false;
  cfg.lr_mode = "constant";

  train::TrainResult res = train::train_phase(cfg, mc, clips, dir);
  EXPECT_DOUBLE_EQ(res.best_val_metric, 1.0);
  EXPECT_TRUE(fs::exists(res.best_checkpoint));
  EXPECT_TRUE(fs::exists(dir / "history.csv"));

  // the saved best checkpoint must rebuild a model that scores the same
  train::CheckpointData data = train::read_checkpoint(res.best_checkpoint);
  auto parsed = nlohmann::json::parse(data.config_json);
  EXPECT_EQ(parsed.at("task"), "phase");
  models::PhaseModelConfig mc_back = train::phase_config_from_json(parsed.at("model"));
  Rng fresh(1234);
  models::PhaseModel<float> restored(mc_back, fresh);
  lensid::nn::NamedTensors<float> buffers;
  restored.buffers("", buffers);
  train::load_weights(data, restored.params(), buffers);
  int hits = 0;
  for (const auto& c : clips) {
    const bool truth = c.label == lensid::clips::ClipLabel::implantation;
    if (restored.classify(c.frames).is_implantation == truth) ++hits;
  }
  EXPECT_EQ(hits, int(clips.size()));
}

TEST(TrainPhase, RejectsClipsOfTheWrongLength) {
  fs::path dir = fresh_dir("phase_badclip");
  Rng rng(43);
  models::PhaseModelConfig mc;
  mc.backbone = "TinyDesk";
  mc.dense_dim = 8;
  mc.sequence_length = 5; // clips below are 3 frames long
  train::TrainConfig cfg;
  cfg.task = "phase";
  EXPECT_THROW(train::train_phase(cfg, mc, {labelled_clip("v", true, rng)}, dir),
               lensid::ValidationError);
}

TEST(TrainHistory, CsvHasHeaderAndRoundTripsDoubles) {
  train::TrainHistory h;
  const double loss = 0.6931471805599453;
  h.records.push_back({1, 0.001, loss, 0.5});
  const std::string csv = h.to_csv();
  EXPECT_EQ(csv.rfind("epoch,lr,train_loss,val_metric\n", 0), 0u);
  // row format: epoch,lr,train_loss,val_metric
  const std::string row = csv.substr(csv.find('\n') + 1);
  std::size_t c1 = row.find(','), c2 = row.find(',', c1 + 1), c3 = row.find(',', c2 + 1);
  EXPECT_EQ(std::stod(row.substr(c2 + 1, c3 - c2 - 1)), loss);
}

} // namespace
