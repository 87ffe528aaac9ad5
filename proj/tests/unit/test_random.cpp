#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "confmc/random.hpp"

using confmc::RandomSource;

TEST(RandomSource, SameSeedAndStreamRepeat) {
  RandomSource a(42, 7), b(42, 7);
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomSource, StreamsDiffer) {
  RandomSource a(42, 0), b(42, 1), c(43, 0);
  int same_ab = 0, same_ac = 0;
  for (int k = 0; k < 100; ++k) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RandomSource, SubstreamLeavesParentUntouched) {
  RandomSource a(5, 3), b(5, 3);
  RandomSource child = a.substream(9);
  (void)child.next_u64();
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_EQ(a.substream(9).next_u64(), RandomSource(5, 3).substream(9).next_u64());
  EXPECT_NE(a.substream(1).next_u64(), a.substream(2).next_u64());
}

TEST(RandomSource, UniformOpenInterval) {
  RandomSource rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(RandomSource, NormalMoments) {
  RandomSource rng(2);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(RandomSource, StudentTQuartiles) {
  RandomSource rng(3);
  const double df = 1.2;
  std::vector<double> draws(100000);
  for (double& x : draws) x = rng.student_t(df);
  std::sort(draws.begin(), draws.end());
  const boost::math::students_t dist(df);
  const double q75 = boost::math::quantile(dist, 0.75);
  EXPECT_NEAR(draws[draws.size() * 3 / 4], q75, 0.03 * q75);
  EXPECT_NEAR(draws[draws.size() / 2], 0.0, 0.02);
}
