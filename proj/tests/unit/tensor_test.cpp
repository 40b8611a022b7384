#include <gtest/gtest.h>

#include "lensid/core/rng.hpp"
#include "lensid/core/tensor.hpp"

using lensid::Rng;
using lensid::Shape;
using lensid::Tensor;

TEST(Tensor, ZeroInitAndShape) {
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24);
  EXPECT_EQ(t.rank(), 3);
  EXPECT_EQ(t.dim(1), 3);
  for (std::int64_t i = 0; i < t.numel(); ++i) EXPECT_EQ(t[i], 0.0f);
}

TEST(Tensor, RowMajorIndexing) {
  Tensor<int> t({2, 3});
  t(1, 2) = 7;
  EXPECT_EQ(t[5], 7);
  Tensor<int> u({2, 3, 4});
  u(1, 2, 3) = 9;
  EXPECT_EQ(u[23], 9);
  Tensor<int> v({2, 2, 2, 2});
  v(1, 0, 1, 0) = 3;
  EXPECT_EQ(v[10], 3);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
  auto r = t.reshaped({3, 2});
  EXPECT_EQ(r.dim(0), 3);
  EXPECT_EQ(r[4], 5.0f);
  EXPECT_THROW(t.reshaped({4, 2}), lensid::ShapeError);
}

TEST(Tensor, DataSizeMustMatchShape) {
  EXPECT_THROW(Tensor<float>({2, 2}, {1, 2, 3}), lensid::ShapeError);
}

TEST(Tensor, Cast) {
  Tensor<float> t({3}, {1.7f, -2.3f, 0.5f});
  auto d = t.cast<double>();
  EXPECT_DOUBLE_EQ(d[0], double(1.7f));
  auto i = t.cast<int>();
  EXPECT_EQ(i[1], -2);
}

TEST(Tensor, FullOnesScalar) {
  auto f = Tensor<float>::full({2, 2}, 3.5f);
  EXPECT_EQ(f[3], 3.5f);
  auto o = Tensor<float>::ones({2});
  EXPECT_EQ(o[1], 1.0f);
  auto s = Tensor<float>::scalar(2.0f);
  EXPECT_EQ(s.numel(), 1);
}

TEST(Tensor, RandomIsDeterministicPerSeed) {
  Rng a(42), b(42), c(43);
  auto ta = Tensor<float>::randn({100}, a);
  auto tb = Tensor<float>::randn({100}, b);
  auto tc = Tensor<float>::randn({100}, c);
  EXPECT_EQ(lensid::max_abs_diff(ta, tb), 0.0f);
  EXPECT_GT(lensid::max_abs_diff(ta, tc), 0.0f);
}

TEST(Tensor, MaxAbsAndFinite) {
  Tensor<float> t({3}, {-4.0f, 2.0f, 1.0f});
  EXPECT_EQ(t.max_abs(), 4.0f);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Rng, UniformIntIsInRangeAndCoversValues) {
  Rng r(7);
  bool seen[5] = {false, false, false, false, false};
  for (int i = 0; i < 1000; ++i) {
    auto v = r.uniform_int(5);
    ASSERT_LT(v, 5u);
    seen[v] = true;
  }
  for (bool s : seen) EXPECT_TRUE(s);
}

TEST(Rng, SplitStreamsDiffer) {
  Rng r(7);
  auto a = r.split("alpha");
  auto b = r.split("beta");
  auto a2 = Rng(7).split("alpha");
  EXPECT_EQ(a.next_u64(), a2.next_u64());
  EXPECT_NE(Rng(7).split("alpha").next_u64(), b.next_u64());
}
