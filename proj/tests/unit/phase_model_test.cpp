#include <gtest/gtest.h>

#include <cmath>

#include "lensid/models/phase_model.hpp"
#include "support/fd_check.hpp"

namespace {

using lensid::ConfigError;
using lensid::Rng;
using lensid::ShapeError;
using lensid::Tensor;
using lensid::ValidationError;
namespace ag = lensid::ag;
namespace data = lensid::data;
namespace models = lensid::models;

models::PhaseModelConfig tiny_cfg(std::int64_t n = 3) {
  models::PhaseModelConfig cfg;
  cfg.backbone = "TinyDesk";
  cfg.rnn_type = "GRU";
  cfg.dense_dim = 8;
  cfg.dropout_rate = 0.0;
  cfg.sequence_length = n;
  return cfg;
}

data::ImageTensor gray_frame(std::int64_t size, float value) {
  Tensor<float> t({3, size, size});
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = value;
  return data::ImageTensor(std::move(t));
}

std::vector<data::ImageTensor> noise_clip(std::int64_t n, std::int64_t size, Rng& rng) {
  std::vector<data::ImageTensor> frames;
  for (std::int64_t i = 0; i < n; ++i) {
    Tensor<float> t({3, size, size});
    for (std::int64_t j = 0; j < t.numel(); ++j) t[j] = float(rng.uniform(0.0, 1.0));
    frames.emplace_back(std::move(t));
  }
  return frames;
}

TEST(PhaseModelConfig, RejectsBadValues) {
  Rng rng(1);
  auto cfg = tiny_cfg();
  cfg.backbone = "Inception";
  EXPECT_THROW(models::PhaseModel<float>(cfg, rng), ConfigError);
  cfg = tiny_cfg();
  cfg.rnn_type = "Elman";
  EXPECT_THROW(models::PhaseModel<float>(cfg, rng), ConfigError);
  cfg = tiny_cfg();
  cfg.sequence_length = 1;
  EXPECT_THROW(models::PhaseModel<float>(cfg, rng), ConfigError);
  cfg = tiny_cfg();
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(models::PhaseModel<float>(cfg, rng), ConfigError);
  cfg = tiny_cfg();
  cfg.rnn_units = 0;
  EXPECT_THROW(models::PhaseModel<float>(cfg, rng), ConfigError);
}

TEST(PhaseModel, OutputShapeIsBatchBySequence) {
  Rng rng(2);
  models::PhaseModel<float> model(tiny_cfg(5), rng);
  auto x = ag::constant(Tensor<float>::randn({2, 5, 3, 32, 32}, rng));
  auto probs = model.forward_probs(x);
  ASSERT_EQ(probs->value.shape(), (lensid::Shape{2, 5}));
  for (std::int64_t i = 0; i < probs->value.numel(); ++i) {
    EXPECT_GT(probs->value[i], 0.0f);
    EXPECT_LT(probs->value[i], 1.0f);
  }
}

TEST(PhaseModel, SequenceLengthPreservedForVariousN) {
  for (std::int64_t n : {2, 4, 7}) {
    Rng rng(100 + n);
    models::PhaseModel<float> model(tiny_cfg(n), rng);
    auto x = ag::constant(Tensor<float>::randn({1, n, 3, 16, 16}, rng));
    EXPECT_EQ(model.forward(x)->value.shape(), (lensid::Shape{1, n}));
  }
}

TEST(PhaseModel, RejectsWrongClipLength) {
  Rng rng(3);
  models::PhaseModel<float> model(tiny_cfg(3), rng);
  auto x = ag::constant(Tensor<float>::randn({1, 4, 3, 16, 16}, rng));
  EXPECT_THROW(model.forward(x), ShapeError);
}

TEST(PhaseModel, ZeroedHeadGivesHalfProbabilities) {
  Rng rng(4);
  models::PhaseModel<float> model(tiny_cfg(3), rng);
  auto& head = model.head();
  head.w->value = Tensor<float>({model.config().dense_dim, 1});
  head.b->value = Tensor<float>({1});
  auto clip = noise_clip(3, 16, rng);
  auto pred = model.classify(clip);
  ASSERT_EQ(pred.per_frame_probs.size(), 3u);
  for (double p : pred.per_frame_probs) EXPECT_EQ(p, 0.5);
  EXPECT_EQ(pred.clip_prob, 0.5);
  EXPECT_TRUE(pred.is_implantation);
}

TEST(PhaseModel, ClipProbIsMeanOfFrameProbs) {
  Rng rng(5);
  models::PhaseModel<float> model(tiny_cfg(4), rng);
  auto pred = model.classify(noise_clip(4, 16, rng));
  double mean = 0.0;
  for (double p : pred.per_frame_probs) mean += p;
  mean /= double(pred.per_frame_probs.size());
  EXPECT_DOUBLE_EQ(pred.clip_prob, mean);
}

TEST(PhaseModel, ClassifyRejectsLengthMismatch) {
  Rng rng(6);
  models::PhaseModel<float> model(tiny_cfg(3), rng);
  EXPECT_THROW(model.classify(noise_clip(5, 16, rng)), ShapeError);
}

TEST(PhaseModel, PredictionsIndependentOfBatchComposition) {
  for (const char* rnn : {"GRU", "BiLSTM"}) {
    Rng rng(7);
    auto cfg = tiny_cfg(3);
    cfg.rnn_type = rnn;
    models::PhaseModel<float> model(cfg, rng);
    Tensor<float> a = Tensor<float>::randn({1, 3, 3, 16, 16}, rng);
    Tensor<float> b = Tensor<float>::randn({1, 3, 3, 16, 16}, rng);
    Tensor<float> ab({2, 3, 3, 16, 16});
    Tensor<float> ba({2, 3, 3, 16, 16});
    const std::int64_t clip = a.numel();
    for (std::int64_t i = 0; i < clip; ++i) {
      ab[i] = a[i];
      ab[clip + i] = b[i];
      ba[i] = b[i];
      ba[clip + i] = a[i];
    }
    ag::NoGradGuard guard;
    auto p_ab = model.forward_probs(ag::constant(ab));
    auto p_ba = model.forward_probs(ag::constant(ba));
    auto p_a = model.forward_probs(ag::constant(a));
    for (std::int64_t t = 0; t < 3; ++t) {
      EXPECT_NEAR(p_ab->value(0, t), p_ba->value(1, t), 1e-6f) << rnn;
      EXPECT_NEAR(p_ab->value(0, t), p_a->value(0, t), 1e-6f) << rnn;
      EXPECT_NEAR(p_ba->value(0, t), p_ab->value(1, t), 1e-6f) << rnn;
    }
  }
}

TEST(PhaseModel, BidirectionalRnnDoublesRecurrentParameters) {
  Rng rng(8);
  auto count_rnn = [&rng](const std::string& rnn_type) {
    auto cfg = models::PhaseModelConfig{};
    cfg.backbone = "VGG19";
    cfg.rnn_type = rnn_type;
    models::PhaseModel<float> model(cfg, rng);
    std::int64_t rnn_params = 0, total = 0;
    for (const auto& [name, v] : model.params()) {
      total += v->value.numel();
      if (name.rfind("rnn.", 0) == 0) rnn_params += v->value.numel();
    }
    return std::pair<std::int64_t, std::int64_t>{rnn_params, total};
  };
  const auto [lstm_rnn, lstm_total] = count_rnn("LSTM");
  const auto [bilstm_rnn, bilstm_total] = count_rnn("BiLSTM");
  EXPECT_GT(bilstm_total, lstm_total);
  EXPECT_EQ(bilstm_rnn, 2 * lstm_rnn);
}

TEST(PhaseModel, TrainingForwardBackwardGivesFiniteGradients) {
  Rng rng(9);
  auto cfg = tiny_cfg(3);
  cfg.dropout_rate = 0.5;
  models::PhaseModel<float> model(cfg, rng);
  auto x = ag::constant(Tensor<float>::randn({2, 3, 3, 64, 64}, rng));
  Rng drop(77);
  auto probs = model.forward_probs(x, true, &drop);
  auto loss = ag::mean_all(probs);
  ag::backward(loss);
  std::size_t with_grad = 0;
  for (const auto& [name, v] : model.params()) {
    if (v->grad.numel() == 0) continue;
    ++with_grad;
    EXPECT_TRUE(v->grad.all_finite()) << name;
  }
  EXPECT_GT(with_grad, 0u);
}

TEST(PhaseModel, RecurrentGradientsMatchFiniteDifferences) {
  Rng rng(10);
  models::PhaseModel<double> model(tiny_cfg(3), rng);
  auto x = ag::constant(Tensor<double>::randn({2, 3, 3, 8, 8}, rng));
  lensid::nn::NamedParams<double> ps;
  model.params("", ps);
  std::vector<ag::Var<double>> rnn_weights;
  for (auto& [name, v] : ps)
    if (name.rfind("rnn.", 0) == 0) rnn_weights.push_back(v);
  ASSERT_FALSE(rnn_weights.empty());
  auto report = lensid::testing::fd_check(
      rnn_weights, [&] { return ag::sum_all(model.forward_probs(x)); });
  EXPECT_LT(report.max_rel_err, 1e-3) << report.worst;
}

TEST(FramesToBatch, AppliesStandardization) {
  Rng rng(11);
  std::vector<data::ImageTensor> frames = {gray_frame(8, 0.5f), gray_frame(8, 1.0f)};
  auto batch = models::frames_to_batch<float>(frames, models::unit_stats());
  ASSERT_EQ(batch.shape(), (lensid::Shape{2, 3, 8, 8}));
  EXPECT_EQ(batch(0, 0, 0, 0), 0.0f);
  EXPECT_EQ(batch(1, 2, 7, 7), 1.0f);
}

struct ScriptedVideo {
  data::SyntheticVideo video;
  explicit ScriptedVideo(double seconds, double fps)
      : video(std::int64_t(seconds * fps), fps, [](std::int64_t) {
          Tensor<float> t({3, 8, 8});
          return data::ImageTensor(std::move(t));
        }) {}
};

TEST(Localize, LongestPositiveRunWins) {
  ScriptedVideo sv(20.0, 4.0);
  std::size_t call = 0;
  std::vector<double> script(18, 0.1);
  script[3] = script[4] = script[5] = 0.9;
  script[10] = 0.9;
  auto scripted = [&call, &script](const std::vector<data::ImageTensor>&) {
    return script.at(call++);
  };
  auto res = models::localize_implantation_with(scripted, sv.video, 1.0, 5);
  ASSERT_TRUE(res.found);
  EXPECT_DOUBLE_EQ(res.start_s, 3.0);
  EXPECT_DOUBLE_EQ(res.end_s, 8.0);
  ASSERT_EQ(res.window_starts.size(), 18u);
  EXPECT_DOUBLE_EQ(res.window_starts.front(), 0.0);
  EXPECT_DOUBLE_EQ(res.window_starts.back(), 17.0);
}

TEST(Localize, TieBetweenRunsKeepsTheFirst) {
  ScriptedVideo sv(12.0, 4.0);
  std::size_t call = 0;
  std::vector<double> script(10, 0.0);
  script[1] = script[2] = 1.0;
  script[6] = script[7] = 1.0;
  auto scripted = [&call, &script](const std::vector<data::ImageTensor>&) {
    return script.at(call++);
  };
  auto res = models::localize_implantation_with(scripted, sv.video, 1.0, 5);
  ASSERT_TRUE(res.found);
  EXPECT_DOUBLE_EQ(res.start_s, 1.0);
  EXPECT_DOUBLE_EQ(res.end_s, 5.0);
}

TEST(Localize, AllNegativeReportsNoneFound) {
  ScriptedVideo sv(10.0, 4.0);
  auto never = [](const std::vector<data::ImageTensor>&) { return 0.2; };
  auto res = models::localize_implantation_with(never, sv.video, 0.5, 5);
  EXPECT_FALSE(res.found);
  EXPECT_FALSE(res.window_probs.empty());
}

TEST(Localize, RejectsTooShortVideo) {
  ScriptedVideo sv(2.5, 4.0);
  auto never = [](const std::vector<data::ImageTensor>&) { return 0.2; };
  EXPECT_THROW(models::localize_implantation_with(never, sv.video, 1.0, 5),
               ValidationError);
}

TEST(Localize, ModelOverloadScoresEveryWindow) {
  Rng rng(12);
  models::PhaseModel<float> model(tiny_cfg(3), rng);
  data::SyntheticVideo video(40, 4.0, [](std::int64_t i) {
    Tensor<float> t({3, 16, 16});
    for (std::int64_t j = 0; j < t.numel(); ++j) t[j] = float((i + j) % 7) / 7.0f;
    return data::ImageTensor(std::move(t));
  });
  auto res = models::localize_implantation(model, video, 2.0);
  EXPECT_EQ(res.window_starts.size(), 4u);
  for (double p : res.window_probs) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

} // namespace
