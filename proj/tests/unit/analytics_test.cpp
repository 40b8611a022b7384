#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lensid/analytics/morphology.hpp"
#include "lensid/analytics/report.hpp"
#include "lensid/analytics/timeline.hpp"
#include "lensid/train/metrics.hpp"
#include "support/tmpdir.hpp"

namespace an = lensid::analytics;
namespace data = lensid::data;
using lensid::Rng;
using lensid::Tensor;

namespace {

void stamp_disk(Tensor<std::uint8_t>& m, double cy, double cx, double r) {
  for (std::int64_t y = 0; y < m.dim(0); ++y)
    for (std::int64_t x = 0; x < m.dim(1); ++x)
      if ((double(y) - cy) * (double(y) - cy) + (double(x) - cx) * (double(x) - cx) <=
          r * r)
        m(y, x) = 1;
}

Tensor<std::uint8_t> disk(std::int64_t side, double cy, double cx, double r) {
  Tensor<std::uint8_t> m({side, side});
  stamp_disk(m, cy, cx, r);
  return m;
}

Tensor<std::uint8_t> random_blob(std::int64_t side, Rng& rng) {
  Tensor<std::uint8_t> m({side, side});
  const int disks = 2 + int(rng.uniform_int(3));
  for (int i = 0; i < disks; ++i)
    stamp_disk(m, rng.uniform(26.0, double(side) - 26.0),
               rng.uniform(26.0, double(side) - 26.0), rng.uniform(8.0, 14.0));
  return m;
}

std::int64_t foreground(const Tensor<std::uint8_t>& m) {
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < m.numel(); ++i) n += m[i];
  return n;
}

std::int64_t diff_count(const Tensor<std::uint8_t>& a, const Tensor<std::uint8_t>& b) {
  EXPECT_TRUE(a.same_shape(b));
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) n += a[i] != b[i];
  return n;
}

bool subset_of(const Tensor<std::uint8_t>& a, const Tensor<std::uint8_t>& b) {
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

int component_count(const Tensor<std::uint8_t>& m) {
  Tensor<std::uint8_t> rest = m;
  int n = 0;
  while (foreground(rest) > 0) {
    const Tensor<std::uint8_t> big = an::largest_component(rest);
    for (std::int64_t i = 0; i < rest.numel(); ++i)
      if (big[i]) rest[i] = 0;
    ++n;
  }
  return n;
}

// Independent point-in-hull oracle: a pixel is inside iff it is on the same
// side of every hull edge.
bool inside_hull(const std::vector<an::PixelPoint>& hull, std::int64_t x, std::int64_t y) {
  const std::size_t n = hull.size();
  const auto cross = [](an::PixelPoint a, an::PixelPoint b, std::int64_t px,
                        std::int64_t py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
  };
  if (n == 1) return x == hull[0].x && y == hull[0].y;
  if (n == 2) {
    if (cross(hull[0], hull[1], x, y) != 0) return false;
    return std::min(hull[0].x, hull[1].x) <= x && x <= std::max(hull[0].x, hull[1].x) &&
           std::min(hull[0].y, hull[1].y) <= y && y <= std::max(hull[0].y, hull[1].y);
  }
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t c = cross(hull[i], hull[(i + 1) % n], x, y);
    if (c == 0) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

an::LensTimeline scripted_timeline(double fps, std::int64_t frames,
                                   const std::function<double(double)>& area,
                                   const std::function<double(double)>& dist) {
  an::LensTimeline tl;
  tl.fps = fps;
  for (std::int64_t i = 0; i < frames; ++i) {
    const double t = double(i) / fps;
    tl.t_s.push_back(t);
    tl.rel_area.push_back(area(t));
    tl.rel_dist.push_back(dist(t));
    tl.valid.push_back(1);
  }
  return tl;
}

} // namespace

TEST(Morphology, DilateAndErodeOnSinglePixel) {
  Tensor<std::uint8_t> m({5, 5});
  m(2, 2) = 1;
  const auto d = an::dilate(m, 3, 3);
  EXPECT_EQ(foreground(d), 9);
  for (std::int64_t y = 1; y <= 3; ++y)
    for (std::int64_t x = 1; x <= 3; ++x) EXPECT_EQ(d(y, x), 1);
  EXPECT_EQ(diff_count(an::erode(d, 3, 3), m), 0);
  EXPECT_EQ(foreground(an::erode(m, 3, 3)), 0);
}

TEST(Morphology, EvenKernelUsesAsymmetricSpan) {
  Tensor<std::uint8_t> m({5, 5});
  m(2, 2) = 1;
  const auto d = an::dilate(m, 2, 2);
  EXPECT_EQ(foreground(d), 4);
  EXPECT_EQ(d(1, 1), 1);
  EXPECT_EQ(d(1, 2), 1);
  EXPECT_EQ(d(2, 1), 1);
  EXPECT_EQ(d(2, 2), 1);
}

TEST(Morphology, ClosingIsExtensiveOpeningIsAntiExtensive) {
  Rng rng(11);
  for (int k : {10, 15})
    for (int trial = 0; trial < 5; ++trial) {
      Tensor<std::uint8_t> m({64, 64});
      for (std::int64_t i = 0; i < m.numel(); ++i) m[i] = rng.bernoulli(0.3) ? 1 : 0;
      EXPECT_TRUE(subset_of(m, an::closing(m, k))) << "k=" << k;
      EXPECT_TRUE(subset_of(an::opening(m, k), m)) << "k=" << k;
    }
}

TEST(Morphology, ClosingAndOpeningAreIdempotent) {
  Rng rng(12);
  for (int k : {10, 15}) {
    Tensor<std::uint8_t> m({64, 64});
    for (std::int64_t i = 0; i < m.numel(); ++i) m[i] = rng.bernoulli(0.25) ? 1 : 0;
    const auto c = an::closing(m, k);
    EXPECT_EQ(diff_count(an::closing(c, k), c), 0) << "k=" << k;
    const auto o = an::opening(m, k);
    EXPECT_EQ(diff_count(an::opening(o, k), o), 0) << "k=" << k;
  }
}

TEST(Morphology, ClosingBridgesNarrowGap) {
  Tensor<std::uint8_t> m({40, 60});
  for (std::int64_t y = 14; y < 26; ++y) {
    for (std::int64_t x = 8; x < 26; ++x) m(y, x) = 1;
    for (std::int64_t x = 31; x < 50; ++x) m(y, x) = 1;
  }
  EXPECT_EQ(component_count(m), 2);
  const auto bridged = an::closing(m, 15);
  EXPECT_TRUE(subset_of(m, bridged));
  EXPECT_EQ(component_count(bridged), 1);
}

TEST(Morphology, LargestComponentKeepsBiggerBlobOnly) {
  Tensor<std::uint8_t> m({30, 30});
  for (std::int64_t y = 2; y < 7; ++y)
    for (std::int64_t x = 2; x < 7; ++x) m(y, x) = 1;   // 25 px
  for (std::int64_t y = 20; y < 23; ++y)
    for (std::int64_t x = 20; x < 23; ++x) m(y, x) = 1; // 9 px
  const auto big = an::largest_component(m);
  EXPECT_EQ(foreground(big), 25);
  EXPECT_EQ(big(3, 3), 1);
  EXPECT_EQ(big(21, 21), 0);
}

TEST(Morphology, DiagonalPixelsAreOneComponent) {
  Tensor<std::uint8_t> m({8, 8});
  for (std::int64_t i = 0; i < 6; ++i) m(i, i) = 1;
  EXPECT_EQ(component_count(m), 1);
  EXPECT_EQ(foreground(an::largest_component(m)), 6);
}

TEST(ConvexHull, FillMatchesPointInPolygonOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor<std::uint8_t> m({18, 18});
    const int pts = 3 + int(rng.uniform_int(8));
    std::vector<an::PixelPoint> support;
    for (int i = 0; i < pts; ++i) {
      const std::int64_t y = std::int64_t(rng.uniform_int(18));
      const std::int64_t x = std::int64_t(rng.uniform_int(18));
      m(y, x) = 1;
      support.push_back({x, y});
    }
    const auto filled = an::fill_convex_hull(m);
    const auto hull = an::convex_hull(support);
    for (std::int64_t y = 0; y < 18; ++y)
      for (std::int64_t x = 0; x < 18; ++x)
        EXPECT_EQ(filled(y, x) == 1, inside_hull(hull, x, y))
            << "trial " << trial << " at (" << y << "," << x << ")";
  }
}

TEST(ConvexHull, FillContainsSupportAndIsIdempotent) {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_blob(96, rng);
    const auto filled = an::fill_convex_hull(m);
    EXPECT_TRUE(subset_of(m, filled));
    EXPECT_EQ(diff_count(an::fill_convex_hull(filled), filled), 0) << "trial " << trial;
  }
}

TEST(ConvexHull, EmptyAndSinglePixelCases) {
  Tensor<std::uint8_t> empty({10, 10});
  EXPECT_EQ(foreground(an::fill_convex_hull(empty)), 0);
  Tensor<std::uint8_t> one({10, 10});
  one(4, 7) = 1;
  const auto filled = an::fill_convex_hull(one);
  EXPECT_EQ(foreground(filled), 1);
  EXPECT_EQ(filled(4, 7), 1);
}

TEST(Postprocess, RoundBlobSurvivesAlmostUnchanged) {
  const auto raw = disk(96, 48, 48, 20);
  const an::ConvexMask out = an::postprocess_mask(data::MaskImage(raw));
  ASSERT_TRUE(out.valid);
  const auto scores =
      lensid::train::seg_scores(out.mask, data::MaskImage(raw));
  EXPECT_GT(scores.iou, 0.98);
  EXPECT_NEAR(out.centroid_x, 48.0, 0.5);
  EXPECT_NEAR(out.centroid_y, 48.0, 0.5);
}

TEST(Postprocess, BridgesStripeCutThroughBlob) {
  auto cut = disk(96, 48, 48, 20);
  for (std::int64_t y = 0; y < 96; ++y)
    for (std::int64_t x = 46; x <= 50; ++x) cut(y, x) = 0;
  EXPECT_EQ(component_count(cut), 2);
  const an::ConvexMask repaired = an::postprocess_mask(data::MaskImage(cut));
  ASSERT_TRUE(repaired.valid);
  const an::ConvexMask reference = an::postprocess_mask(data::MaskImage(disk(96, 48, 48, 20)));
  const auto scores = lensid::train::seg_scores(repaired.mask, reference.mask);
  EXPECT_GT(scores.iou, 0.98);
}

TEST(Postprocess, SpeckleFarFromBlobIsDropped) {
  auto noisy = disk(96, 30, 30, 15);
  noisy(80, 80) = 1;
  noisy(80, 81) = 1;
  noisy(81, 80) = 1;
  noisy(81, 81) = 1;
  const an::ConvexMask cleaned = an::postprocess_mask(data::MaskImage(noisy));
  ASSERT_TRUE(cleaned.valid);
  EXPECT_EQ(component_count(cleaned.mask.labels()), 1);
  const an::ConvexMask reference = an::postprocess_mask(data::MaskImage(disk(96, 30, 30, 15)));
  EXPECT_EQ(diff_count(cleaned.mask.labels(), reference.mask.labels()), 0);
}

TEST(Postprocess, OutputOnlyEverGrowsTheDominantBlob) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_blob(96, rng);
    const an::ConvexMask out = an::postprocess_mask(data::MaskImage(m));
    if (!out.valid) continue;
    // convex hull of the surviving blob covers that blob's own support
    const auto smooth = an::opening(an::closing(m, 15), 10);
    const auto survivor = an::largest_component(smooth);
    EXPECT_TRUE(subset_of(survivor, out.mask.labels())) << "trial " << trial;
  }
}

TEST(Postprocess, ApplyingTwiceChangesNothing) {
  Rng rng(32);
  int valid_cases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_blob(96, rng);
    const an::ConvexMask once = an::postprocess_mask(data::MaskImage(m));
    const an::ConvexMask twice = an::postprocess_mask(once.mask);
    EXPECT_EQ(once.valid, twice.valid) << "trial " << trial;
    EXPECT_EQ(diff_count(once.mask.labels(), twice.mask.labels()), 0) << "trial " << trial;
    valid_cases += once.valid;
  }
  EXPECT_GT(valid_cases, 40);
}

TEST(Postprocess, EmptyMaskIsInvalidNotFatal) {
  const an::ConvexMask out = an::postprocess_mask(data::MaskImage(Tensor<std::uint8_t>({32, 32})));
  EXPECT_FALSE(out.valid);
  EXPECT_EQ(out.mask.foreground_count(), 0);
  EXPECT_EQ(out.area, 0.0);
}

TEST(Postprocess, OpeningFirstOrderIsAvailable) {
  an::MorphologyConfig cfg;
  cfg.close_first = false;
  auto cut = disk(96, 48, 48, 20);
  for (std::int64_t y = 0; y < 96; ++y)
    for (std::int64_t x = 46; x <= 50; ++x) cut(y, x) = 0;
  // opening first erases the two half-blobs less kindly but must still run
  const an::ConvexMask out = an::postprocess_mask(data::MaskImage(cut), cfg);
  const an::ConvexMask closed_first = an::postprocess_mask(data::MaskImage(cut));
  ASSERT_TRUE(closed_first.valid);
  if (out.valid) EXPECT_LE(out.area, closed_first.area * 1.05);
}

TEST(LensStatistics, IdenticalMasksGiveUnitAreaZeroDistance) {
  const data::MaskImage m(disk(96, 48, 48, 20));
  const an::LensTimeline tl = an::lens_statistics({m, m}, {m, m}, 2.0);
  ASSERT_EQ(tl.frames(), 2);
  for (std::int64_t i = 0; i < 2; ++i) {
    EXPECT_EQ(tl.valid[std::size_t(i)], 1);
    EXPECT_DOUBLE_EQ(tl.rel_area[std::size_t(i)], 1.0);
    EXPECT_DOUBLE_EQ(tl.rel_dist[std::size_t(i)], 0.0);
  }
  EXPECT_DOUBLE_EQ(tl.t_s[1], 0.5);
}

TEST(LensStatistics, ConcentricHalfRadiusGivesQuarterArea) {
  const data::MaskImage pupil(disk(192, 96, 96, 50));
  const data::MaskImage lens(disk(192, 96, 96, 25));
  const an::LensTimeline tl = an::lens_statistics({lens}, {pupil}, 1.0);
  ASSERT_EQ(tl.valid[0], 1);
  EXPECT_NEAR(tl.rel_area[0], 0.25, 0.02);
  EXPECT_NEAR(tl.rel_dist[0], 0.0, 0.02);
}

TEST(LensStatistics, OffsetByRadiusGivesHalfDiameterDistance) {
  const data::MaskImage pupil(disk(128, 64, 64, 20));
  const data::MaskImage lens(disk(128, 64, 84, 20));
  const an::LensTimeline tl = an::lens_statistics({lens}, {pupil}, 1.0);
  ASSERT_EQ(tl.valid[0], 1);
  EXPECT_NEAR(tl.rel_area[0], 1.0, 0.02);
  EXPECT_NEAR(tl.rel_dist[0], 0.5, 0.02);
}

TEST(LensStatistics, TranslationLeavesMeasuresUnchanged) {
  const data::MaskImage pupil(disk(128, 60, 60, 18));
  const data::MaskImage lens(disk(128, 64, 55, 12));
  const data::MaskImage pupil_shift(disk(128, 67, 63, 18));
  const data::MaskImage lens_shift(disk(128, 71, 58, 12));
  const an::LensTimeline a = an::lens_statistics({lens}, {pupil}, 1.0);
  const an::LensTimeline b = an::lens_statistics({lens_shift}, {pupil_shift}, 1.0);
  ASSERT_EQ(a.valid[0], 1);
  ASSERT_EQ(b.valid[0], 1);
  EXPECT_NEAR(a.rel_area[0], b.rel_area[0], 1e-9);
  EXPECT_NEAR(a.rel_dist[0], b.rel_dist[0], 1e-9);
}

TEST(LensStatistics, DoublingScaleMovesMeasuresUnderTwoPercent) {
  const an::LensTimeline small = an::lens_statistics(
      {data::MaskImage(disk(112, 56, 50, 13))}, {data::MaskImage(disk(112, 56, 56, 20))},
      1.0);
  const an::LensTimeline big = an::lens_statistics(
      {data::MaskImage(disk(224, 112, 100, 26))},
      {data::MaskImage(disk(224, 112, 112, 40))}, 1.0);
  ASSERT_EQ(small.valid[0], 1);
  ASSERT_EQ(big.valid[0], 1);
  EXPECT_NEAR(big.rel_area[0] / small.rel_area[0], 1.0, 0.02);
  EXPECT_NEAR(big.rel_dist[0] / small.rel_dist[0], 1.0, 0.02);
}

TEST(LensStatistics, EmptyFramesAreFlaggedInvalid) {
  const data::MaskImage m(disk(96, 48, 48, 20));
  const data::MaskImage empty(Tensor<std::uint8_t>({96, 96}));
  const an::LensTimeline tl = an::lens_statistics({m, empty, m}, {empty, m, m}, 1.0);
  EXPECT_EQ(tl.valid[0], 0); // pupil empty
  EXPECT_EQ(tl.valid[1], 0); // lens empty
  EXPECT_EQ(tl.valid[2], 1);
}

TEST(LensStatistics, RejectsBadInput) {
  const data::MaskImage m(disk(32, 16, 16, 8));
  EXPECT_THROW(an::lens_statistics({m, m}, {m}, 1.0), lensid::ValidationError);
  EXPECT_THROW(an::lens_statistics({}, {}, 1.0), lensid::ValidationError);
  EXPECT_THROW(an::lens_statistics({m}, {m}, 0.0), lensid::ValidationError);
}

TEST(UnfoldingDelay, ImmediateWhenAlwaysUnfolded) {
  const auto tl = scripted_timeline(2.0, 30, [](double) { return 1.0; },
                                    [](double) { return 0.0; });
  const an::UnfoldingResult res = an::unfolding_delay(tl);
  ASSERT_TRUE(res.reached);
  EXPECT_DOUBLE_EQ(res.delay_s, 0.0);
}

TEST(UnfoldingDelay, NotReachedWhileLensKeepsMoving) {
  const auto tl = scripted_timeline(2.0, 30, [](double) { return 1.0; },
                                    [](double) { return 0.2; });
  EXPECT_FALSE(an::unfolding_delay(tl).reached);
}

TEST(UnfoldingDelay, ScriptedRampLandsOnTwentySeconds) {
  for (double fps : {1.0, 5.0, 25.0}) {
    const auto tl = scripted_timeline(
        fps, std::int64_t(fps * 30.0),
        [](double t) { return std::min(1.0, t / 20.0); },
        [](double t) { return t < 20.0 ? 0.3 : 0.0; });
    const an::UnfoldingResult res = an::unfolding_delay(tl);
    ASSERT_TRUE(res.reached) << "fps " << fps;
    EXPECT_NEAR(res.delay_s, 20.0, 1.0 / fps + 1e-9) << "fps " << fps;
  }
}

TEST(UnfoldingDelay, MonotoneInAreaFraction) {
  Rng rng(41);
  an::LensTimeline tl;
  tl.fps = 2.0;
  double a = 0.3;
  for (std::int64_t i = 0; i < 120; ++i) {
    a = std::clamp(a + rng.uniform(-0.05, 0.08), 0.0, 1.0);
    tl.t_s.push_back(double(i) / 2.0);
    tl.rel_area.push_back(a);
    tl.rel_dist.push_back(rng.uniform(0.0, 0.15));
    tl.valid.push_back(1);
  }
  double prev = -1.0;
  for (double frac : {0.5, 0.7, 0.9, 0.95, 1.0}) {
    an::UnfoldingParams p;
    p.area_fraction = frac;
    const an::UnfoldingResult res = an::unfolding_delay(tl, p);
    const double delay = res.reached ? res.delay_s : 1e18;
    EXPECT_GE(delay, prev) << "area_fraction " << frac;
    prev = delay;
  }
}

TEST(UnfoldingDelay, InvalidFramesInsideWindowAreSkipped) {
  auto tl = scripted_timeline(1.0, 10, [](double) { return 1.0; },
                              [](double) { return 0.0; });
  tl.valid[1] = 0;
  tl.rel_area[1] = 0.0;
  tl.rel_dist[1] = 9.0;
  const an::UnfoldingResult res = an::unfolding_delay(tl);
  ASSERT_TRUE(res.reached);
  EXPECT_DOUBLE_EQ(res.delay_s, 0.0);
}

TEST(UnfoldingDelay, AllInvalidTimelineIsAnError) {
  auto tl = scripted_timeline(1.0, 5, [](double) { return 1.0; },
                              [](double) { return 0.0; });
  std::fill(tl.valid.begin(), tl.valid.end(), 0);
  EXPECT_THROW(an::unfolding_delay(tl), lensid::ValidationError);
}

TEST(InstabilityProfile, ZeroMovementStabilizesAtStart) {
  const auto tl = scripted_timeline(2.0, 40, [](double) { return 1.0; },
                                    [](double) { return 0.0; });
  const an::InstabilityResult res = an::instability_profile(tl);
  ASSERT_TRUE(res.reached);
  EXPECT_DOUBLE_EQ(res.stabilization_s, 0.0);
}

TEST(InstabilityProfile, PerpetualOscillationNeverStabilizes) {
  const auto tl = scripted_timeline(
      2.0, 200, [](double) { return 1.0; },
      [](double t) { return std::int64_t(t) % 2 == 0 ? 0.3 : 0.02; });
  EXPECT_FALSE(an::instability_profile(tl).reached);
}

TEST(InstabilityProfile, ScriptedStopLandsOnSeventySeconds) {
  for (double fps : {1.0, 4.0}) {
    const auto tl = scripted_timeline(
        fps, std::int64_t(fps * 100.0) + 1, [](double) { return 1.0; },
        [](double t) { return t < 70.0 ? 0.25 : 0.0; });
    const an::InstabilityResult res = an::instability_profile(tl);
    ASSERT_TRUE(res.reached) << "fps " << fps;
    EXPECT_NEAR(res.stabilization_s, 70.0, 1.0 / fps + 1e-9) << "fps " << fps;
  }
}

TEST(InstabilityProfile, QuietSpellBeforeRelapseDoesNotCount) {
  const auto tl = scripted_timeline(
      1.0, 101, [](double) { return 1.0; },
      [](double t) {
        if (t < 10.0) return 0.3;
        if (t < 30.0) return 0.0;
        if (t < 40.0) return 0.3;
        return 0.0;
      });
  const an::InstabilityResult res = an::instability_profile(tl);
  ASSERT_TRUE(res.reached);
  EXPECT_DOUBLE_EQ(res.stabilization_s, 40.0);
}

TEST(InstabilityProfile, BlipAfterGuardWindowIsIgnored) {
  const auto tl = scripted_timeline(
      1.0, 101, [](double) { return 1.0; },
      [](double t) { return t == 95.0 ? 0.3 : 0.0; });
  const an::InstabilityResult res = an::instability_profile(tl);
  ASSERT_TRUE(res.reached);
  EXPECT_DOUBLE_EQ(res.stabilization_s, 0.0);
}

TEST(Report, WritesAllFourFiles) {
  lensid::testing::TempDir tmp;
  const auto tl = scripted_timeline(2.0, 20, [](double t) { return std::min(1.0, t / 3.0); },
                                    [](double t) { return t < 4.0 ? 0.2 : 0.05; });
  const an::UnfoldingResult ur = an::unfolding_delay(tl);
  const an::InstabilityResult ir = an::instability_profile(tl);
  an::emit_report(tl, ur, {}, ir, {}, {}, tmp.file("report"));
  for (const char* name : {"timeline.csv", "summary.json", "rel_area.png", "rel_dist.png"})
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / "report" / name)) << name;

  std::ifstream csv(tmp.path() / "report" / "timeline.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t_s,rel_area,rel_dist,valid");
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 20);
}

TEST(Report, RerunsAreByteIdentical) {
  lensid::testing::TempDir tmp;
  const auto tl = scripted_timeline(3.0, 31, [](double t) { return std::min(1.0, t / 5.1); },
                                    [](double t) { return 0.4 / (1.0 + t); });
  const an::UnfoldingResult ur = an::unfolding_delay(tl);
  const an::InstabilityResult ir = an::instability_profile(tl);
  an::emit_report(tl, ur, {}, ir, {}, {}, tmp.file("a"));
  an::emit_report(tl, ur, {}, ir, {}, {}, tmp.file("b"));
  for (const char* name : {"timeline.csv", "summary.json"}) {
    std::ifstream fa(tmp.path() / "a" / name, std::ios::binary);
    std::ifstream fb(tmp.path() / "b" / name, std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << name;
    EXPECT_FALSE(sa.str().empty()) << name;
  }
}

TEST(Report, SummaryMarksUnreachedTimesAsNull) {
  lensid::testing::TempDir tmp;
  const auto tl = scripted_timeline(2.0, 30, [](double) { return 1.0; },
                                    [](double) { return 0.5; });
  const an::UnfoldingResult ur = an::unfolding_delay(tl);     // never unfolds
  const an::InstabilityResult ir = an::instability_profile(tl); // never stabilizes
  EXPECT_FALSE(ur.reached);
  EXPECT_FALSE(ir.reached);
  an::emit_report(tl, ur, {}, ir, {}, {}, tmp.file("r"));
  std::ifstream js(tmp.path() / "r" / "summary.json");
  const nlohmann::json j = nlohmann::json::parse(js);
  EXPECT_TRUE(j.at("unfolding_delay_s").is_null());
  EXPECT_TRUE(j.at("stabilization_time_s").is_null());
  EXPECT_DOUBLE_EQ(j.at("params").at("unfolding").at("dist_threshold").get<double>(), 0.1);
  EXPECT_DOUBLE_EQ(j.at("params").at("stability").at("sustain_s").get<double>(), 5.0);
  EXPECT_EQ(j.at("params").at("morphology").at("closing_size").get<int>(), 15);
}

TEST(Report, ReachedTimesAreNumbers) {
  lensid::testing::TempDir tmp;
  const auto tl = scripted_timeline(1.0, 40, [](double) { return 1.0; },
                                    [](double t) { return t < 8.0 ? 0.3 : 0.0; });
  an::emit_report(tl, an::unfolding_delay(tl), {}, an::instability_profile(tl), {}, {},
                  tmp.file("r"));
  std::ifstream js(tmp.path() / "r" / "summary.json");
  const nlohmann::json j = nlohmann::json::parse(js);
  EXPECT_DOUBLE_EQ(j.at("unfolding_delay_s").get<double>(), 8.0);
  EXPECT_DOUBLE_EQ(j.at("stabilization_time_s").get<double>(), 8.0);
}

TEST(Report, SingleFrameTimelineStillEmits) {
  lensid::testing::TempDir tmp;
  an::LensTimeline tl;
  tl.fps = 1.0;
  tl.t_s = {0.0};
  tl.rel_area = {0.9};
  tl.rel_dist = {0.05};
  tl.valid = {1};
  const an::UnfoldingResult ur = an::unfolding_delay(tl); // sustain cannot fit
  EXPECT_FALSE(ur.reached);
  an::emit_report(tl, ur, {}, an::instability_profile(tl), {}, {}, tmp.file("one"));
  std::ifstream csv(tmp.path() / "one" / "timeline.csv");
  std::string all((std::istreambuf_iterator<char>(csv)), std::istreambuf_iterator<char>());
  EXPECT_EQ(all,
            "t_s,rel_area,rel_dist,valid\n0,0.90000000000000002,0.050000000000000003,1\n");
}

TEST(Report, UnwritableDestinationIsAnIoError) {
  lensid::testing::TempDir tmp;
  std::ofstream(tmp.file("blocker")) << "x";
  const auto tl = scripted_timeline(1.0, 5, [](double) { return 1.0; },
                                    [](double) { return 0.0; });
  EXPECT_THROW(an::emit_report(tl, {}, {}, {}, {}, {}, tmp.file("blocker") + "/nested"),
               lensid::IoError);
}
