#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cogo/rng.hpp"

using cogo::Rng;

TEST(Rng, SameSeedAndStreamGiveSameSequence) {
  Rng a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsAndSubstreamsDiffer) {
  Rng a(42, 0), b(42, 1);
  Rng s1 = a.substream(1), s2 = a.substream(2);
  int same = 0, same_sub = 0;
  for (int i = 0; i < 100; ++i) {
    same += a.next_u64() == b.next_u64();
    same_sub += s1.next_u64() == s2.next_u64();
  }
  EXPECT_EQ(same, 0);
  EXPECT_EQ(same_sub, 0);
}

TEST(Rng, SubstreamDoesNotDependOnParentCounter) {
  Rng a(3, 4);
  Rng before = a.substream(9);
  a.next_u64();
  Rng after = a.substream(9);
  EXPECT_EQ(before.next_u64(), after.next_u64());
}

TEST(Rng, UniformStaysInHalfOpenUnitInterval) {
  Rng r(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const float u = r.uniform();
    ASSERT_GE(u, 0.0f);
    ASSERT_LT(u, 1.0f);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(Rng, BelowCoversRangeUniformly) {
  Rng r(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = r.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, NormalHasUnitMoments) {
  Rng r(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
